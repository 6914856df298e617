#include <doctest.h>

#include "na/errors.hpp"
#include "na/model.hpp"

using namespace na;

namespace {
const char* kNames[] = {"water", "jet", "steam", "exp", "nl1", "nl2"};
}

TEST_CASE("golden model files load") {
  const DynamicalModel jet = load_model(NA_MODELS_DIR "/jet.model");
  CHECK(jet.dim() == 2);
  CHECK(jet.init[0] == Interval(0.45, 0.50));
  CHECK(jet.init[1] == Interval(-0.60, -0.55));
  CHECK(jet.flow[0] == parse("-y - 1.5*x^2 - 0.5*x^3 - 0.1", jet.vars));
  CHECK(jet.horizon == 1.5);

  const DynamicalModel nl1 = load_model(NA_MODELS_DIR "/nl1.model");
  CHECK(nl1.domain[0] == Interval(0.0, 1.0));
  CHECK(nl1.domain[1] == Interval(-1.0, 1.0));

  const DynamicalModel steam = load_model(NA_MODELS_DIR "/steam.model");
  CHECK(steam.dim() == 3);
  CHECK(steam.horizon == 2.0);

  for (const char* n : kNames) {
    const DynamicalModel m = load_model(std::string(NA_MODELS_DIR "/") + n + ".model");
    CHECK(m.name == n);
    CHECK(m.warnings.empty());
  }
}

TEST_CASE("format and parse are idempotent on golden files") {
  for (const char* n : kNames) {
    const DynamicalModel m = load_model(std::string(NA_MODELS_DIR "/") + n + ".model");
    const std::string once = format_model(m);
    const DynamicalModel back = parse_model(once);
    CHECK(format_model(back) == once);
    for (int i = 0; i < m.dim(); ++i) CHECK(back.flow[i] == m.flow[i]);
    CHECK(back.domain == m.domain);
    CHECK(back.bad == m.bad);
  }
}

TEST_CASE("validation errors") {
  const std::string base = "vars = [\"x\"]\nflow = [\"-x\"]\ndomain = [[-1, 1]]\nbad = [[0.5, 1]]\n";
  CHECK_THROWS_AS(parse_model(base + "init = [[2, 3]]\nhorizon = 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_model(base + "init = [[0, 0.1]]\nhorizon = 0\n"), ValidationError);
  CHECK_THROWS_AS(parse_model(base + "init = [[0, 0.1]]\n"), ValidationError);
  CHECK_THROWS_AS(parse_model(base + "init = [[0, 0.1]]\nhorizon = 1\ncolour = 3\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse_model(base + "init = [[0, 0.1]]\nhorizon = [1\n"), SyntaxError);
  CHECK_THROWS_AS(parse_model("vars = [\"x\"]\nflow = [\"sqrt(x)\"]\ndomain = [[-1, 1]]\n"
                              "init = [[0, 0.1]]\nbad = [[0.5, 1]]\nhorizon = 1\n"),
                  ModelDomainError);
  CHECK_THROWS_AS(parse_model("vars = [\"x\"]\nflow = [\"x +\"]\ndomain = [[-1, 1]]\n"
                              "init = [[0, 0.1]]\nbad = [[0.5, 1]]\nhorizon = 1\n"),
                  SyntaxError);
  const DynamicalModel far = parse_model(
      "vars = [\"x\"]\nflow = [\"-x\"]\ndomain = [[-1, 1]]\ninit = [[0, 0.1]]\n"
      "bad = [[5, 6]]\nhorizon = 1 # comment\n");
  CHECK(far.warnings.size() == 1);
}
