#include <doctest.h>

#include <thread>

#include "emulab/bus.hpp"
#include "emulab/error.hpp"

using namespace emulab;
using namespace emulab::bus;
using namespace std::chrono_literals;

TEST_CASE("remote subscriber receives local publications") {
  Bus b;
  b.register_topic("telemetry.link.up", TopicKind::Telemetry);
  TcpServer server(b, "127.0.0.1", 0);
  REQUIRE(server.port() != 0);
  TcpClient client("127.0.0.1", server.port());
  client.subscribe("telemetry.link.up", Mode::All);
  for (int i = 0; i < 20; ++i) b.publish("telemetry.link.up", "m" + std::to_string(i));
  for (int i = 0; i < 20; ++i) {
    const auto e = client.receive(2000ms);
    REQUIRE(e);
    CHECK(e->topic == "telemetry.link.up");
    CHECK(e->seq == static_cast<std::uint64_t>(i + 1));
    CHECK(e->text() == "m" + std::to_string(i));
  }
  server.stop();
}

TEST_CASE("remote publisher reaches local subscribers") {
  Bus b;
  b.register_topic("control.run-0001", TopicKind::Control);
  auto sub = b.subscribe("control.run-0001", Mode::All);
  TcpServer server(b, "127.0.0.1", 0);
  TcpClient client("127.0.0.1", server.port());
  const std::string body = R"({"op":"stop"})";
  client.publish("control.run-0001", to_bytes(body));
  const auto e = sub->next(2s);
  REQUIRE(e);
  CHECK(e->text() == body);
  CHECK(e->seq == 1);
}

TEST_CASE("errors come back as error frames") {
  Bus b;
  TcpServer server(b, "127.0.0.1", 0);
  TcpClient client("127.0.0.1", server.port());
  try {
    client.subscribe("missing", Mode::All);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("UnknownTopic") != std::string::npos);
  }
}

TEST_CASE("two remote clients see identical streams") {
  Bus b;
  b.register_topic("t", TopicKind::Telemetry);
  TcpServer server(b, "127.0.0.1", 0);
  TcpClient c1("127.0.0.1", server.port()), c2("127.0.0.1", server.port());
  c1.subscribe("t", Mode::All);
  c2.subscribe("t", Mode::All);
  for (int i = 0; i < 50; ++i) b.publish("t", std::to_string(i));
  for (int i = 0; i < 50; ++i) {
    const auto a = c1.receive(2000ms), z = c2.receive(2000ms);
    REQUIRE(a);
    REQUIRE(z);
    CHECK(*a == *z);
  }
}
