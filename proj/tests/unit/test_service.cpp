#include <doctest.h>

#include <httplib.h>

#include <set>
#include <thread>

#include "kgacc/annotation.hpp"
#include "kgacc/labelgen.hpp"
#include "kgacc/service.hpp"
#include "kgacc/synth.hpp"

using namespace kgacc;
using nlohmann::json;

namespace {

struct ServiceFixture {
  std::shared_ptr<KnowledgeGraph> g =
      std::make_shared<KnowledgeGraph>(synth::build_graph(synth::draw_sizes_for_triples(20000, {}, 6)));
  LabelSource ls = gen_bmm(*g, {}, 7);
  std::chrono::system_clock::time_point now{std::chrono::seconds(1700000000)};
  AnnotationService svc{ServiceOptions{std::chrono::seconds(900), 5, [this] { return now; }}};

  ServiceFixture() { svc.add_graph("kg", g); }

  json labels_for(const json& task) const {
    json out = json::array();
    for (const auto& item : task["items"]) out.push_back(ls[item["triple"].get<TriplePos>()] != 0);
    return json{{"labels", out}};
  }

  // Leases and answers tasks until the session stops.
  void run_to_end(const std::string& sid, const std::string& who) {
    for (int guard = 0; guard < 100000; ++guard) {
      const auto next = svc.next_task(sid, who);
      if (next["task"].is_null()) return;
      svc.submit_labels(next["task"]["task_id"], who, labels_for(next["task"]));
    }
    FAIL("session did not stop");
  }
};

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 200;
}

const json kSessionBody = {{"graph", "kg"}, {"design", "twcs"}, {"m", 3}, {"epsilon", 0.05}, {"alpha", 0.05},
                           {"seed", 5}};

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("create a session") {
    ServiceFixture f;
    const auto r = f.svc.create_session(kSessionBody);
    CHECK(r["session_id"] == "s1");
    CHECK(r["status"] == "awaiting_annotations");
    CHECK(f.svc.create_session(kSessionBody)["session_id"] == "s2");
    auto bad = kSessionBody;
    bad["graph"] = "missing";
    CHECK(status_of([&] { f.svc.create_session(bad); }) == 404);
    bad = kSessionBody;
    bad["epsilon"] = 2.0;
    CHECK(status_of([&] { f.svc.create_session(bad); }) == 422);
    bad = kSessionBody;
    bad["design"] = "bogus";
    CHECK(status_of([&] { f.svc.create_session(bad); }) == 422);
    bad = kSessionBody;
    bad["m"] = "three";
    CHECK(status_of([&] { f.svc.create_session(bad); }) == 422);
    CHECK(status_of([&] { f.svc.create_session(json::array()); }) == 400);
  }

  TEST_CASE("lease, submit and resubmit") {
    ServiceFixture f;
    const std::string sid = f.svc.create_session(kSessionBody)["session_id"];
    CHECK(status_of([&] { f.svc.next_task(sid, ""); }) == 401);
    CHECK(status_of([&] { f.svc.next_task("s99", "ann"); }) == 404);

    const auto first = f.svc.next_task(sid, "ann");
    const auto task = first["task"];
    REQUIRE(task.is_object());
    CHECK(task["status"] == "leased");
    CHECK(task["lease"]["annotator"] == "ann");
    // the same annotator gets the same lease back
    CHECK(f.svc.next_task(sid, "ann")["task"]["task_id"] == task["task_id"]);
    // another annotator gets another task
    CHECK(f.svc.next_task(sid, "bob")["task"]["task_id"] != task["task_id"]);

    const std::string tid = task["task_id"];
    CHECK(status_of([&] { f.svc.submit_labels("nope", "ann", f.labels_for(task)); }) == 404);
    CHECK(status_of([&] { f.svc.submit_labels(tid, "bob", f.labels_for(task)); }) == 409);
    CHECK(status_of([&] { f.svc.submit_labels(tid, "", f.labels_for(task)); }) == 401);

    auto partial = f.labels_for(task);
    partial["labels"][0] = nullptr;
    try {
      f.svc.submit_labels(tid, "ann", partial);
      FAIL("incomplete labels accepted");
    } catch (const ServiceError& e) {
      CHECK(e.status() == 422);
      CHECK(json::parse(e.what())["unlabeled"] == json::array({0}));
    }
    auto short_body = f.labels_for(task);
    short_body["labels"].erase(short_body["labels"].size() - 1);
    CHECK(status_of([&] { f.svc.submit_labels(tid, "ann", short_body); }) == 422);

    const auto ok = f.svc.submit_labels(tid, "ann", f.labels_for(task));
    CHECK(ok["duplicate"] == false);
    const auto again = f.svc.submit_labels(tid, "ann", f.labels_for(task));
    CHECK(again["duplicate"] == true);
    auto flipped = f.labels_for(task);
    flipped["labels"][0] = !flipped["labels"][0].get<bool>();
    CHECK(status_of([&] { f.svc.submit_labels(tid, "ann", flipped); }) == 409);
  }

  TEST_CASE("expired leases return to the pool") {
    ServiceFixture f;
    const std::string sid = f.svc.create_session(kSessionBody)["session_id"];
    const auto task = f.svc.next_task(sid, "ann")["task"];
    f.now += std::chrono::seconds(901);
    CHECK(status_of([&] { f.svc.submit_labels(task["task_id"], "ann", f.labels_for(task)); }) == 409);
    // the oldest open task is the expired one
    const auto taken = f.svc.next_task(sid, "bob")["task"];
    CHECK(taken["task_id"] == task["task_id"]);
    CHECK(f.svc.submit_labels(taken["task_id"], "bob", f.labels_for(taken))["duplicate"] == false);
  }

  TEST_CASE("annotators never share a lease") {
    ServiceFixture f;
    const std::string sid = f.svc.create_session(kSessionBody)["session_id"];
    std::vector<std::string> ids(8);
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < ids.size(); ++i)
      pool.emplace_back([&, i] { ids[i] = f.svc.next_task(sid, "a" + std::to_string(i))["task"]["task_id"]; });
    for (auto& t : pool) t.join();
    CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == ids.size());
  }

  TEST_CASE("a finished session matches the oracle run with the same seed") {
    ServiceFixture f;
    const std::string sid = f.svc.create_session(kSessionBody)["session_id"];
    CHECK(f.svc.estimate(sid)["mu_hat"].is_null());
    f.run_to_end(sid, "ann");
    const auto est = f.svc.estimate(sid);
    CHECK(est["status"] == "satisfied");
    CHECK(est["tasks"]["open"] == 0);

    SessionConfig cfg;
    cfg.design = {DesignKind::twcs, 3};
    cfg.seed = 5;
    OracleBackend oracle(f.ls);
    const auto ref = run_static(*f.g, cfg, oracle);
    CHECK(est["mu_hat"].get<double>() == ref.estimate.mu_hat);
    CHECK(est["moe"].get<double>() == ref.estimate.moe);
    CHECK(est["units"] == ref.session->units());
    CHECK(est["cost_hours"].get<double>() == doctest::Approx(ref.cost.hours()));
    CHECK(f.svc.next_task(sid, "ann")["task"].is_null());

    const auto archive = f.svc.archive(sid);
    auto resumed = Session::resume(*f.g, archive);
    CHECK(resumed.status() == SessionStatus::satisfied);
  }

  TEST_CASE("a task shows its items and one context block") {
    auto g = std::make_shared<KnowledgeGraph>(synth::build_graph(std::vector<std::uint32_t>(50, 8)));
    AnnotationService svc;
    svc.add_graph("eight", g);
    auto body = kSessionBody;
    body["graph"] = "eight";
    body["m"] = 5;
    const std::string sid = svc.create_session(body)["session_id"];
    const auto task = svc.next_task(sid, "ann")["task"];
    REQUIRE(task["items"].size() == 5);
    for (const auto& item : task["items"]) {
      CHECK(item["label"].is_null());
      CHECK(item.contains("subject"));
      CHECK(item.contains("predicate"));
      CHECK(item.contains("object"));
    }
    CHECK(task["context"].is_object());
    CHECK(task["context"]["siblings"].size() <= 3);
    CHECK(task["context"]["hint"].get<std::string>().find(task["entity_id"].get<std::string>()) !=
          std::string::npos);
    CHECK(task["cluster_size"] == 8);
  }

  TEST_CASE("HTTP round trip") {
    ServiceFixture f;
    auto srv = make_http_server(f.svc);
    const int port = srv->bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { srv->listen_after_bind(); });
    srv->wait_until_ready();

    httplib::Client cli("127.0.0.1", port);
    const httplib::Headers auth{{"Authorization", "Bearer ann"}};
    auto health = cli.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);

    auto created = cli.Post("/sessions", kSessionBody.dump(), "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const std::string sid = json::parse(created->body)["session_id"];

    auto unauth = cli.Get("/sessions/" + sid + "/tasks/next");
    REQUIRE(unauth);
    CHECK(unauth->status == 401);
    CHECK(json::parse(unauth->body).contains("error"));

    auto next = cli.Get("/sessions/" + sid + "/tasks/next", auth);
    REQUIRE(next);
    CHECK(next->status == 200);
    const auto task = json::parse(next->body)["task"];
    const std::string tid = task["task_id"];
    auto posted = cli.Post("/tasks/" + tid + "/labels", auth, f.labels_for(task).dump(), "application/json");
    REQUIRE(posted);
    CHECK(posted->status == 200);
    auto malformed = cli.Post("/tasks/" + tid + "/labels", auth, "{not json", "application/json");
    REQUIRE(malformed);
    CHECK(malformed->status == 400);
    auto missing = cli.Get("/sessions/zzz/estimate");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    auto est = cli.Get("/sessions/" + sid + "/estimate");
    REQUIRE(est);
    CHECK(est->status == 200);
    CHECK(json::parse(est->body)["tasks"]["submitted"] == 1);
    auto arch = cli.Get("/sessions/" + sid + "/archive");
    REQUIRE(arch);
    CHECK(arch->status == 200);

    srv->stop();
    th.join();
  }
}
