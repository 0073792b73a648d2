#include <doctest.h>

#include "dcomposer/compose_io.hpp"
#include "dcomposer/error.hpp"
#include "dcomposer/graph.hpp"
#include "dcomposer/project.hpp"
#include "support.hpp"

using namespace dcomposer;
namespace fs = std::filesystem;

namespace {

Errc load_error(const fs::path& p) {
  try {
    (void)load_project(p);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::InvalidValue;
}

}  // namespace

TEST_CASE("save then load keeps hand-placed positions") {
  auto dir = testsupport::scratch_dir("project");
  auto s = parse_compose(testsupport::read_file(testsupport::corpus_dir() /
                                                "nodejs_mongodb.yml"))
               .stack;
  auto d = auto_layout(s);
  for (auto id : s.artifact_ids()) d = apply_user_position(d, id, 13.5 * id.value, 7.25 * id.value);
  ProjectSettings settings{"/srv/app", {false, "compose.yaml"}};
  save_project(s, d, settings, dir / "p.dcproj.json");
  auto p = load_project(dir / "p.dcproj.json");
  CHECK(model_equal(p.stack, s));
  CHECK(p.stack == s);
  CHECK(p.diagram == d);
  CHECK(p.settings == settings);
}

TEST_CASE("ids handed out before a save stay retired after load") {
  auto dir = testsupport::scratch_dir("ids");
  auto s = new_stack("ids");
  auto a = s.add_artifact(ArtifactClass::Service, "a");
  auto b = s.add_artifact(ArtifactClass::Service, "b");
  s.remove_artifact(b);
  save_project(s, auto_layout(s), {}, dir / "p.json");
  auto p = load_project(dir / "p.json");
  auto c = p.stack.add_artifact(ArtifactClass::Service, "c");
  CHECK(c != a);
  CHECK(c != b);
}

TEST_CASE("load errors") {
  auto dir = testsupport::scratch_dir("errors");
  CHECK(load_error(dir / "missing.json") == Errc::IoError);

  testsupport::write_file(dir / "garbage.json", "{not json");
  CHECK(load_error(dir / "garbage.json") == Errc::CorruptProject);

  auto s = new_stack("x");
  s.add_artifact(ArtifactClass::Service, "web");
  auto j = project_to_json(s, auto_layout(s), {});

  auto future = j;
  future["format_version"] = 2;
  testsupport::write_file(dir / "future.json", future.dump());
  CHECK(load_error(dir / "future.json") == Errc::UnsupportedVersion);

  auto ghost = j;
  ghost["diagram"]["nodes"][0]["id"] = 777;
  testsupport::write_file(dir / "ghost.json", ghost.dump());
  CHECK(load_error(dir / "ghost.json") == Errc::CorruptProject);

  auto wrong = j;
  wrong["stack"]["services"] = "nope";
  testsupport::write_file(dir / "wrong.json", wrong.dump());
  CHECK(load_error(dir / "wrong.json") == Errc::CorruptProject);

  CHECK_THROWS_AS(save_project(s, auto_layout(s), {}, dir / "no" / "such" / "dir.json"), Error);
}

TEST_CASE("property: project JSON round-trips random stacks") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    auto s = testsupport::random_stack(rng);
    auto d = auto_layout(s);
    auto p = project_from_json(project_to_json(s, d, {}));
    CHECK(p.stack == s);
    CHECK(p.diagram == d);
  }
}
