#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <future>
#include <sstream>

#include <nlohmann/json.hpp>

#include "piw/error.hpp"
#include "piw/pilotsim.hpp"
#include "piw/server.hpp"
#include "piw/stream.hpp"

using namespace piw;
using namespace piw::stream;
using nlohmann::json;

namespace {

std::shared_ptr<StreamContext> context(double window = 5.0, double hop = 1.0, Warmup warmup = Warmup::suppress) {
  auto ctx = std::make_shared<StreamContext>();
  ctx->window.window = window;
  ctx->window.hop = hop;
  ctx->window.warmup = warmup;
  return ctx;
}

std::vector<telemetry::Sample> samples_of(const telemetry::StickTrace& tr) {
  std::vector<telemetry::Sample> s;
  for (std::size_t i = 0; i < tr.size(); ++i) s.push_back({tr.time_at(i), tr.lon[i], tr.lat[i]});
  return s;
}

std::string record_line(const telemetry::Sample& s) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"t\":" << s.t << ",\"lon\":" << s.lon << ",\"lat\":" << s.lat << "}\n";
  return os.str();
}

/// Sends `payload`, half-closes, and collects every reply line.
std::vector<std::string> exchange(std::uint16_t port, const std::string& payload) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  std::size_t sent = 0;
  while (sent < payload.size()) {
    const auto n = ::send(fd, payload.data() + sent, payload.size() - sent, MSG_NOSIGNAL);
    REQUIRE(n > 0);
    sent += static_cast<std::size_t>(n);
  }
  ::shutdown(fd, SHUT_WR);
  std::string all;
  char buf[4096];
  for (;;) {
    const auto n = ::recv(fd, buf, sizeof buf, 0);
    if (n <= 0) break;
    all.append(buf, static_cast<std::size_t>(n));
  }
  ::close(fd);
  std::vector<std::string> lines;
  std::istringstream is(all);
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_SUITE("stream") {
  TEST_CASE("constant feed gives zero metrics") {
    Session s(context());
    std::vector<WindowEstimate> all;
    for (int i = 0; i <= 1500; ++i) {
      for (auto& e : s.ingest({i * 0.01, 0.3, -0.2})) all.push_back(e);
    }
    REQUIRE(!all.empty());
    for (const auto& e : all) {
      CHECK(e.lon.duty_cycle == 0.0);
      CHECK(e.lon.piw1 == 0.0);
      CHECK(e.lat.piw1 == 0.0);
      CHECK(e.samples_used <= 5.0 * 100.0 + 1);
      CHECK_FALSE(e.p_high.has_value());
    }
    CHECK(all.front().t_end == doctest::Approx(5.0));
    CHECK(all.size() == 11);  // t_end = 5, 6, ..., 15
  }

  TEST_CASE("partial warmup emits from the first hop") {
    Session s(context(5.0, 1.0, Warmup::partial));
    std::vector<WindowEstimate> all;
    for (int i = 0; i <= 300; ++i) {
      for (auto& e : s.ingest({i * 0.01, 0.0, 0.0})) all.push_back(e);
    }
    REQUIRE(all.size() == 3);
    CHECK(all[0].t_end == doctest::Approx(1.0));
    CHECK(all[0].samples_used == 101);
  }

  TEST_CASE("out-of-order records are dropped and the session continues") {
    Session s(context());
    s.ingest({0.0, 0, 0});
    s.ingest({0.5, 0, 0});
    try {
      s.ingest({0.4, 0, 0});
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::OutOfOrderRecord);
    }
    CHECK_THROWS_AS(s.ingest({0.5, 0, 0}), Error);
    s.ingest({0.6, 0, 0});
    CHECK(s.counters().dropped == 2);
    CHECK(s.counters().records == 5);
    CHECK(s.buffered() == 3);
  }

  TEST_CASE("window metrics equal offline metrics on the same slice") {
    sim::SimScenario sc;
    sc.duration = 60.0;
    sc.seed = 3;
    sc.workload = sim::Workload::high;
    const auto records = samples_of(sim::simulate_trial(sc));
    for (const auto warmup : {Warmup::suppress, Warmup::partial}) {
      auto ctx = context(10.0, 2.5, warmup);
      Session s(ctx);
      std::vector<WindowEstimate> out;
      for (const auto& r : records) {
        for (auto& e : s.ingest(r)) out.push_back(e);
      }
      REQUIRE(out.size() > 10);
      for (const auto& e : out) {
        std::vector<telemetry::Sample> slice;
        for (const auto& r : records) {
          if (r.t >= e.t_end - 10.0 - 1e-9 && r.t <= e.t_end + 1e-9) slice.push_back(r);
        }
        const auto tr = telemetry::resample(slice, 100.0);
        core::PIWConfig cfg;
        cfg.agg_normalization = core::AggNormalization::none;
        const auto lon = core::compute_axis_metrics(tr, Axis::lon, nullptr, cfg);
        const auto lat = core::compute_axis_metrics(tr, Axis::lat, nullptr, cfg);
        CHECK(std::fabs(e.lon.duty_cycle - lon.duty_cycle) < 1e-9);
        CHECK(std::fabs(e.lon.aggressiveness - lon.aggressiveness) < 1e-9);
        CHECK(std::fabs(e.lat.piw1 - lat.piw1) < 1e-9);
        CHECK(e.samples_used == tr.size());
      }
      CHECK(s.buffered() <= 10 * 100 + 2);
    }
  }

  TEST_CASE("determinism of emissions") {
    sim::SimScenario sc;
    sc.duration = 20.0;
    const auto records = samples_of(sim::simulate_trial(sc));
    auto run = [&] {
      LineProtocol p(context());
      std::vector<std::string> lines;
      for (const auto& r : records) {
        for (auto& l : p.on_line(record_line(r))) lines.push_back(l);
      }
      lines.push_back(p.on_eof());
      return lines;
    };
    CHECK(run() == run());
  }

  TEST_CASE("line protocol errors and summary") {
    LineProtocol p(context());
    auto r = p.on_line("{\"t\": 0, \"lon\": 0}");
    REQUIRE(r.size() == 1);
    auto j = json::parse(r[0]);
    CHECK(j["type"] == "error");
    CHECK(j["line"] == 1);
    CHECK(j["error"].get<std::string>().find("lat") != std::string::npos);
    CHECK(p.on_line("garbage").size() == 1);
    CHECK(p.on_line("").empty());
    CHECK(p.on_line("{\"t\":1,\"lon\":0,\"lat\":0}").empty());
    const auto late = p.on_line("{\"t\":0.5,\"lon\":0,\"lat\":0}");
    REQUIRE(late.size() == 1);
    CHECK(json::parse(late[0])["error"].get<std::string>().find("OutOfOrderRecord") != std::string::npos);
    const auto summary = json::parse(p.on_eof());
    CHECK(summary["type"] == "summary");
    CHECK(summary["records"] == 2);
    CHECK(summary["dropped"] == 1);
    CHECK(summary["windows_emitted"] == 0);
    CHECK(summary["errors"] == 2);
  }

  TEST_CASE("model-backed estimates carry p_high") {
    auto ctx = context();
    auto model = std::make_shared<wlmodel::LogisticModel>();
    model->predictor_names = {"lon_duty_cycle"};
    model->coefficients = {0.0, 1.0};
    model->normalization.mode = core::AggNormalization::none;
    ctx->model = model;
    Session s(ctx);
    std::vector<WindowEstimate> out;
    for (int i = 0; i <= 600; ++i) {
      for (auto& e : s.ingest({i * 0.01, (i % 2) * 0.1, 0.0})) out.push_back(e);
    }
    REQUIRE(!out.empty());
    CHECK(*out[0].p_high == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
    CHECK(json::parse(estimate_to_json(out[0])).contains("p_high"));
  }

  TEST_CASE("stdin mode") {
    std::istringstream in("{\"t\":0,\"lon\":0,\"lat\":0}\n{\"t\":2.5,\"lon\":0.1,\"lat\":0}\n{\"t\":5,\"lon\":0,\"lat\":0}\n");
    std::ostringstream out;
    run_stdio(in, out, context());
    std::istringstream lines(out.str());
    std::vector<json> parsed;
    for (std::string l; std::getline(lines, l);) parsed.push_back(json::parse(l));
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0]["type"] == "estimate");
    CHECK(parsed[0]["t_end"] == 5.0);
    CHECK(parsed[1]["type"] == "summary");
  }

  TEST_CASE("listen address parsing") {
    auto a = parse_listen_address("127.0.0.1:9000");
    CHECK(a.host == "127.0.0.1");
    CHECK(a.port == 9000);
    a = parse_listen_address(":0");
    CHECK(a.port == 0);
    a = parse_listen_address("[::1]:8080");
    CHECK(a.host == "::1");
    CHECK_THROWS_AS(parse_listen_address("nonsense"), Error);
    CHECK_THROWS_AS(parse_listen_address("host:99999"), Error);
  }

  TEST_CASE("server: empty session, isolation, bind failure") {
    Server server(context(2.0, 1.0));
    const auto port = server.listen({"127.0.0.1", 0});
    server.start();

    const auto empty = exchange(port, "");
    REQUIRE(empty.size() == 1);
    const auto s0 = json::parse(empty[0]);
    CHECK(s0["records"] == 0);
    CHECK(s0["dropped"] == 0);
    CHECK(s0["windows_emitted"] == 0);

    std::string still, moving;
    for (int i = 0; i <= 500; ++i) {
      still += record_line({i * 0.01, 0.1, 0.1});
      moving += record_line({i * 0.01, (i % 2) * 0.05, 0.7});
    }
    auto a = std::async(std::launch::async, exchange, port, still);
    auto b = std::async(std::launch::async, exchange, port, moving);
    const auto la = a.get();
    const auto lb = b.get();
    REQUIRE(la.size() == 5);  // t_end 2, 3, 4, 5 and the summary
    REQUIRE(lb.size() == 5);
    for (std::size_t i = 0; i + 1 < la.size(); ++i) {
      const auto ea = json::parse(la[i]), eb = json::parse(lb[i]);
      CHECK(ea["lon_duty_cycle"] == 0.0);
      CHECK(ea["lon_piw1"] == 0.0);
      CHECK(eb["lon_duty_cycle"] == 1.0);
      CHECK(eb["lat_duty_cycle"] == 0.0);
      CHECK(ea["t_end"] == eb["t_end"]);
    }
    CHECK(json::parse(la.back())["records"] == 501);

    Server clash(context());
    CHECK_THROWS_AS(clash.listen({"127.0.0.1", port}), Error);
    server.stop();
    CHECK(server.sessions_started() == 3);
  }
}
