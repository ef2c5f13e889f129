#include <gtest/gtest.h>

#include <thread>

#include "support/fixtures.hpp"
#include "synsel/study_http.hpp"

using namespace synsel;

namespace {

class StudyHttp : public ::testing::Test {
 protected:
  void SetUp() override {
    mount_study_routes(server_, svc_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void TearDown() override {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  httplib::Client client() { return httplib::Client("127.0.0.1", port_); }

  std::pair<int, Json> post(const std::string& path, const Json& body) {
    auto res = client().Post(path, body.dump(), "application/json");
    if (!res) throw std::runtime_error("no response for " + path);
    return {res->status, Json::parse(res->body)};
  }

  std::pair<int, Json> get(const std::string& path) {
    auto res = client().Get(path);
    if (!res) throw std::runtime_error("no response for " + path);
    return {res->status, Json::parse(res->body)};
  }

  StudyService svc_{fixtures::study_catalog(), fixtures::study_selections()};
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

Json wire_answers(const Json& pretest, bool by_word) {
  Json out = Json::array();
  for (const auto& set : pretest["sets"]) {
    for (const auto& q : set["questions"]) {
      // Fixture gold: the second question of each set is w2.
      const bool second = q["question_id"].get<std::string>().ends_with(".q1");
      out.push_back({{"question_id", q["question_id"]},
                     {"choice", by_word ? set["choices"][second ? 1 : 0] : Json(second ? 2 : 1)}});
    }
  }
  return out;
}

}  // namespace

TEST_F(StudyHttp, FullProtocolOverTheWire) {
  auto [st, created] = post("/sessions", {{"participant_id", "alice"}, {"seed", 4}});
  ASSERT_EQ(st, 201) << created.dump();
  const std::string id = created["session_id"];
  EXPECT_EQ(created["assigned_sets"].size(), 15u);
  EXPECT_EQ(post("/sessions", {{"participant_id", "alice"}, {"seed", 4}}).first, 201);
  EXPECT_EQ(post("/sessions", {{"participant_id", "alice"}, {"seed", 5}}).first, 409);

  auto [pst, pre] = get("/sessions/" + id + "/pretest");
  ASSERT_EQ(pst, 200);
  EXPECT_EQ(pre["sets"].size(), 15u);
  EXPECT_EQ(pre.dump().find("gold"), std::string::npos);

  const std::string set_id = created["assigned_sets"][0];
  EXPECT_EQ(get("/sessions/" + id + "/posttest/" + set_id).first, 409);
  EXPECT_EQ(post("/sessions/" + id + "/answers", {{"phase", "posttest"}, {"answers", wire_answers(pre, false)}}).first,
            409);

  auto [ast, ack] = post("/sessions/" + id + "/answers",
                         {{"phase", "pretest"}, {"answers", wire_answers(pre, true)}, {"timestamp", 1000}});
  ASSERT_EQ(ast, 200) << ack.dump();
  EXPECT_EQ(ack["accepted"], 45);
  EXPECT_TRUE(ack["pretest_complete"].get<bool>());

  auto [gst, page] = get("/sessions/" + id + "/posttest/" + set_id);
  ASSERT_EQ(gst, 200);
  EXPECT_EQ(page["examples"]["w1"]["remaining"], 3);
  for (int k = 0; k < 3; ++k) {
    auto [rst, reveal] = post("/sessions/" + id + "/readme", {{"set_id", set_id}, {"word", "blick"}});
    EXPECT_EQ(rst, 200) << reveal.dump();
    EXPECT_EQ(reveal["revealed_count"], k + 1);
  }
  EXPECT_EQ(post("/sessions/" + id + "/readme", {{"set_id", set_id}, {"word", 1}}).first, 409);
  EXPECT_EQ(get("/sessions/" + id + "/posttest/" + set_id).second["examples"]["w1"]["revealed"].size(), 3u);

  EXPECT_EQ(post("/sessions/" + id + "/questionnaire", {{"set_id", set_id}, {"rating", 3}}).first, 200);
  EXPECT_EQ(post("/sessions/" + id + "/questionnaire", {{"set_id", set_id}, {"rating", 9}}).first, 400);

  EXPECT_EQ(post("/sessions/" + id + "/answers", {{"phase", "posttest"}, {"answers", wire_answers(pre, false)}}).first,
            200);
  EXPECT_EQ(get("/reports/study").first, 409);  // no proficiency yet
  EXPECT_EQ(post("/sessions/" + id + "/proficiency", {{"score", 71.5}}).first, 200);

  auto [rst, report] = get("/reports/study");
  ASSERT_EQ(rst, 200) << report.dump();
  EXPECT_EQ(report["threshold"], 71.5);
  EXPECT_EQ(report["groups"]["above"]["size"], 1);
  EXPECT_EQ(svc_.session(id).readme_count(set_id), 3u);
}

TEST_F(StudyHttp, ErrorStatuses) {
  EXPECT_EQ(get("/sessions/nope/pretest").first, 404);
  EXPECT_EQ(post("/sessions", {{"seed", 1}}).first, 400);
  auto res = client().Post("/sessions", "not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  const std::string id = post("/sessions", {{"participant_id", "bob"}, {"seed", 1}}).second["session_id"];
  EXPECT_EQ(post("/sessions/" + id + "/answers", {{"phase", "midterm"}, {"answers", Json::array()}}).first, 400);
  EXPECT_EQ(post("/sessions/" + id + "/answers",
                 {{"phase", "pretest"}, {"answers", {{{"question_id", "set00.q0"}, {"choice", 3}}}}})
                .first,
            400);
  std::string unassigned;
  const auto s = svc_.session(id);
  for (const auto& set : svc_.catalog().sets()) {
    if (!s.assigned(set.set_id)) unassigned = set.set_id;
  }
  EXPECT_EQ(get("/sessions/" + id + "/posttest/" + unassigned).first, 404);
  EXPECT_EQ(get("/sessions/" + id + "/posttest/no-such-set").first, 404);
}
