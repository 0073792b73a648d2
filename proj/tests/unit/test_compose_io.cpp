#include <doctest.h>

#include <set>

#include "dcomposer/compose_io.hpp"
#include "dcomposer/error.hpp"
#include "support.hpp"

using namespace dcomposer;
using testsupport::corpus_dir;
using testsupport::read_file;

namespace {

std::multiset<std::string> edge_strings(const Stack& s) {
  std::multiset<std::string> out;
  for (const auto& e : s.edges()) {
    out.insert(std::string(s.key_of(e.from)) + " " +
               std::string(compose_key(tag_of(e.kind))) + " " + std::string(s.key_of(e.to)));
  }
  return out;
}

Errc parse_error(const std::string& text) {
  try {
    (void)parse_compose(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a parse error");
  return Errc::InvalidValue;
}

}  // namespace

TEST_CASE("every corpus file round-trips to a model-equal stack") {
  auto files = testsupport::corpus_files();
  REQUIRE(files.size() >= 20);
  for (const auto& f : files) {
    CAPTURE(f.filename().string());
    auto first = parse_compose(read_file(f)).stack;
    auto yaml = serialize_compose(first).yaml;
    auto second = parse_compose(yaml).stack;
    CHECK(model_equal(first, second));
    CHECK(serialize_compose(second).yaml == yaml);
  }
}

TEST_CASE("corpus covers all classes and edge kinds") {
  std::set<ArtifactClass> classes;
  std::set<EdgeKindTag> kinds;
  for (const auto& f : testsupport::corpus_files()) {
    auto s = parse_compose(read_file(f)).stack;
    for (auto id : s.artifact_ids()) classes.insert(*s.class_of(id));
    for (const auto& e : s.edges()) kinds.insert(tag_of(e.kind));
  }
  CHECK(classes.size() == 5);
  CHECK(kinds.size() == 6);
}

TEST_CASE("property: random stacks round-trip") {
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 300; ++i) {
    auto s = testsupport::random_stack(rng);
    auto yaml = serialize_compose(s).yaml;
    auto back = parse_compose(yaml).stack;
    if (!model_equal(s, back)) {
      FAIL_CHECK("round-trip mismatch for\n" << yaml);
      break;
    }
  }
}

TEST_CASE("client/server/db example parses to the expected graph") {
  auto s = parse_compose(read_file(corpus_dir() / "client_server_db.yml")).stack;
  CHECK(s.services().size() == 3);
  CHECK(s.networks().size() == 2);
  CHECK(s.volumes().size() == 1);
  CHECK(s.configs().empty());
  CHECK(s.secrets().empty());
  std::multiset<std::string> expected = {
      "client networks public", "server networks public", "server networks private",
      "db networks private",    "db volumes mongo-data",  "client depends_on server",
      "server depends_on db"};
  CHECK(edge_strings(s) == expected);
  CHECK(s.services()[0].stdin_open);
}

TEST_CASE("nodejs/mongodb example parses configs and secrets") {
  auto s = parse_compose(read_file(corpus_dir() / "nodejs_mongodb.yml")).stack;
  CHECK(s.artifact_count() == 6);
  REQUIRE(s.secrets().size() == 1);
  CHECK(std::get<FileSource>(*s.secrets()[0].source).path == "./id_rsa");
  REQUIRE(s.configs().size() == 1);
  CHECK(std::get<FileSource>(*s.configs()[0].source).path == "./hostname.conf");
  std::multiset<std::string> expected = {
      "nodejs networks internal", "mongodb networks internal", "nodejs secrets ssh-key",
      "mongodb secrets ssh-key",  "nodejs configs hostname",   "mongodb volumes mongo-data"};
  CHECK(edge_strings(s) == expected);
}

TEST_CASE("degenerate and malformed input") {
  CHECK(parse_error("") == Errc::NotAMapping);
  CHECK(parse_error("- a\n- b\n") == Errc::NotAMapping);
  CHECK(parse_error("just text") == Errc::NotAMapping);
  CHECK(parse_error("services: [unclosed\n") == Errc::YamlSyntaxError);
  CHECK(parse_error("a: b: c\n") == Errc::YamlSyntaxError);
}

TEST_CASE("unresolved references become notices, not edges") {
  const std::string text =
      "services:\n"
      "  web:\n"
      "    image: nginx\n"
      "    depends_on: [ghost, api]\n"
      "    networks: [nowhere]\n"
      "  api:\n"
      "    image: api\n";
  auto r = parse_compose(text);
  // independent scan: referenced names minus declared keys
  const std::set<std::string> declared = {"web", "api"};
  const std::vector<std::string> referenced = {"ghost", "api", "nowhere"};
  std::size_t missing = 0;
  for (const auto& name : referenced) missing += declared.count(name) ? 0 : 1;
  std::size_t dangling = 0;
  for (const auto& n : r.notices) dangling += n.code == NoticeCode::DanglingReference;
  CHECK(dangling == missing);
  CHECK(r.stack.edges().size() == 1);
  for (const auto& n : r.notices) {
    CHECK(n.line > 0);
    CHECK_FALSE(n.path.empty());
  }
}

TEST_CASE("duplicate service keys are disambiguated on output") {
  Stack s = new_stack("dup");
  s.add_artifact(ArtifactClass::Service, "ser");
  s.add_artifact(ArtifactClass::Service, "ser");
  auto out = serialize_compose(s);
  CHECK(out.yaml.find("  ser: {}\n") != std::string::npos);
  CHECK(out.yaml.find("  ser-2: {}\n") != std::string::npos);
  REQUIRE(out.notices.size() == 1);
  CHECK(out.notices[0].code == NoticeCode::DuplicateYamlKey);
  CHECK(out.notices[0].severity == NoticeSeverity::Warn);
}

TEST_CASE("duplicate YAML keys in the input keep both services") {
  auto r = parse_compose(read_file(testsupport::data_dir() / "fixtures" / "validation" /
                                   "duplicate_key.yml"));
  REQUIRE(r.stack.services().size() == 2);
  CHECK(r.stack.services()[0].image->repository == "nginx");
  CHECK(r.stack.services()[1].image->repository == "httpd");
}

TEST_CASE("empty stack serializes to services only") {
  CHECK(serialize_compose(new_stack("e")).yaml == "services: {}\n");
}

TEST_CASE("serialization is deterministic") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    auto s = testsupport::random_stack(rng);
    CHECK(serialize_compose(s).yaml == serialize_compose(s).yaml);
    Stack copy = s;
    CHECK(serialize_compose(copy).yaml == serialize_compose(s).yaml);
  }
}

TEST_CASE("unknown keys survive a round-trip") {
  auto text = read_file(corpus_dir() / "unknown_keys.yml");
  auto yaml = serialize_compose(parse_compose(text).stack).yaml;
  CHECK(yaml.find("com.example.team: infra") != std::string::npos);
  CHECK(yaml.find("max-size: 10m") != std::string::npos);
  CHECK(yaml.find("x-common:\n  retries: 5") != std::string::npos);
}

TEST_CASE("long-form depends_on keeps its conditions") {
  auto s = parse_compose(read_file(corpus_dir() / "depends_long.yml")).stack;
  CHECK(s.edges().size() == 2);
  auto yaml = serialize_compose(s).yaml;
  CHECK(yaml.find("condition: service_healthy") != std::string::npos);
}

TEST_CASE("environment mapping form is written as a list") {
  auto s = parse_compose("services:\n  a:\n    environment:\n      K: v\n      N: \"3\"\n").stack;
  REQUIRE(s.services()[0].environment.size() == 2);
  auto yaml = serialize_compose(s).yaml;
  CHECK(yaml.find("- K=v") != std::string::npos);
  CHECK(yaml.find("- N=3") != std::string::npos);
}

TEST_CASE("version key is emitted only when present on input") {
  auto with = parse_compose(read_file(corpus_dir() / "versioned.yml")).stack;
  CHECK(serialize_compose(with).yaml.rfind("version:", 0) == 0);
  auto without = parse_compose(read_file(corpus_dir() / "single_service.yml")).stack;
  CHECK(serialize_compose(without).yaml.find("version:") == std::string::npos);
}

TEST_CASE("omit_defaults controls default emission") {
  auto s = parse_compose("services:\n  a:\n    image: nginx\n").stack;
  auto terse = serialize_compose(s, {true}).yaml;
  auto full = serialize_compose(s, {false}).yaml;
  CHECK(terse.find("restart") == std::string::npos);
  CHECK(full.find("restart: \"no\"") != std::string::npos);
  CHECK(model_equal(parse_compose(full).stack, s));
}

TEST_CASE("fuzz: parse either succeeds or throws a declared error") {
  std::mt19937_64 rng(99);
  std::vector<std::string> seeds;
  for (const auto& f : testsupport::corpus_files()) seeds.push_back(read_file(f));
  const std::string alphabet = "abc:- \n\t[]{}\"'&*!|>#%@,.0123456789";
  const std::set<Errc> allowed = {Errc::YamlSyntaxError, Errc::NotAMapping};
  for (int i = 0; i < 3000; ++i) {
    std::string text;
    if (i % 2 == 0) {
      text = seeds[rng() % seeds.size()];
      for (int m = 0; m < 1 + static_cast<int>(rng() % 8); ++m) {
        if (text.empty()) break;
        const auto pos = rng() % text.size();
        switch (rng() % 3) {
          case 0: text[pos] = alphabet[rng() % alphabet.size()]; break;
          case 1: text.erase(pos, 1 + rng() % 10); break;
          default: text.insert(pos, 1, alphabet[rng() % alphabet.size()]); break;
        }
      }
    } else {
      const auto len = rng() % 200;
      for (std::size_t k = 0; k < len; ++k) text.push_back(static_cast<char>(rng() % 256));
    }
    try {
      auto r = parse_compose(text);
      (void)serialize_compose(r.stack);
    } catch (const Error& e) {
      if (!allowed.count(e.code())) {
        FAIL_CHECK("unexpected error " << to_string(e.code()) << " for:\n" << text);
      }
    } catch (const std::exception& e) {
      FAIL_CHECK("undeclared exception " << e.what() << " for:\n" << text);
    }
  }
}
