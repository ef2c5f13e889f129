#pragma once

#include <httplib.h>

#include "synsel/study.hpp"

namespace synsel {

namespace detail {

inline int status_for(const StudyError& e) {
  switch (e.kind()) {
    case StudyError::Kind::kInvalid: return 400;
    case StudyError::Kind::kNotFound: return 404;
    case StudyError::Kind::kConflict: return 409;
  }
  return 400;
}

inline void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

// Words travel as 1/2 or as the word itself.
inline Word parse_wire_word(const Json& v, const QuestionSet* set) {
  if (v.is_number_integer()) {
    const int i = v.get<int>();
    if (i != 1 && i != 2) throw invalid("word must be 1 or 2");
    return word_from_int(i);
  }
  if (v.is_string() && set) {
    const auto s = v.get<std::string>();
    if (s == set->choices[0]) return Word::kFirst;
    if (s == set->choices[1]) return Word::kSecond;
  }
  throw invalid("word must be 1, 2 or one of the set's choices");
}

inline std::optional<std::int64_t> wire_timestamp(const Json& body) {
  if (!body.contains("timestamp") || body["timestamp"].is_null()) return std::nullopt;
  return body["timestamp"].get<std::int64_t>();
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const StudyError& e) {
      reply(res, status_for(e), Json{{"error", e.what()}});
    } catch (const Json::exception& e) {
      reply(res, 400, Json{{"error", std::string("malformed request: ") + e.what()}});
    } catch (const std::exception& e) {
      reply(res, 500, Json{{"error", e.what()}});
    }
  };
}

inline Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  Json j = Json::parse(req.body);
  if (!j.is_object()) throw invalid("request body must be a JSON object");
  return j;
}

}  // namespace detail

// Wire API over a StudyService. Bodies are JSON; errors are {"error": msg}
// with 400 (invalid), 404 (unknown) or 409 (state conflict).
inline void mount_study_routes(httplib::Server& server, StudyService& svc) {
  using detail::guarded;
  using detail::reply;

  auto session_summary = [](const StudySession& s) {
    return Json{{"session_id", s.session_id}, {"participant_id", s.participant_id}, {"seed", s.seed},
                {"assigned_sets", s.assigned_sets}};
  };

  server.Post("/sessions", guarded([&svc, session_summary](const httplib::Request& req, httplib::Response& res) {
    const Json body = detail::parse_body(req);
    const auto s = svc.create_session(body.at("participant_id").get<std::string>(),
                                      body.value("seed", std::uint64_t{0}));
    reply(res, 201, session_summary(s));
  }));

  server.Get(R"(/sessions/([^/]+)/pretest)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, 200, svc.pretest(req.matches[1]));
  }));

  server.Post(R"(/sessions/([^/]+)/answers)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const Json body = detail::parse_body(req);
    const TestPhase phase = parse_test_phase(body.at("phase").get<std::string>());
    std::vector<AnswerInput> answers;
    for (const auto& a : body.at("answers")) {
      const auto qid = a.at("question_id").get<std::string>();
      answers.push_back({qid, detail::parse_wire_word(a.at("choice"), svc.catalog().set_of_question(qid))});
    }
    reply(res, 200, svc.submit_answers(req.matches[1], phase, answers, detail::wire_timestamp(body)));
  }));

  server.Get(R"(/sessions/([^/]+)/posttest/([^/]+))",
             guarded([&svc](const httplib::Request& req, httplib::Response& res) {
               reply(res, 200, svc.serve_posttest(req.matches[1], req.matches[2]));
             }));

  server.Post(R"(/sessions/([^/]+)/readme)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const Json body = detail::parse_body(req);
    const auto set_id = body.at("set_id").get<std::string>();
    const Word w = detail::parse_wire_word(body.at("word"), &svc.catalog().at(set_id));
    reply(res, 200, svc.record_readme(req.matches[1], set_id, w, detail::wire_timestamp(body)));
  }));

  server.Post(R"(/sessions/([^/]+)/questionnaire)",
              guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const Json body = detail::parse_body(req);
                const auto set_id = body.at("set_id").get<std::string>();
                svc.record_questionnaire(req.matches[1], set_id, body.at("rating").get<int>(),
                                         detail::wire_timestamp(body));
                reply(res, 200, Json{{"set_id", set_id}, {"rating", body["rating"]}});
              }));

  // Scores come from the external proficiency test.
  server.Post(R"(/sessions/([^/]+)/proficiency)",
              guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const Json body = detail::parse_body(req);
                svc.set_proficiency(req.matches[1], body.at("score").get<double>());
                reply(res, 200, Json{{"session_id", std::string(req.matches[1])}, {"score", body["score"]}});
              }));

  server.Get("/reports/study", guarded([&svc](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, svc.report().to_json());
  }));
}

}  // namespace synsel
