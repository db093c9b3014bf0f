#include "ccgp/config.hpp"

#include <doctest.h>

using namespace ccgp;
using json = nlohmann::json;

TEST_SUITE("config") {

TEST_CASE("defaults") {
  const PipelineConfig c = pipeline_config_from_json(json::object());
  const auto t = c.resolved_train();
  CHECK(t.clusters == 5);
  CHECK(t.neighbors == 1);
  CHECK(t.max_distance == 150.0);
  CHECK(t.batch_size == 128);
  CHECK(t.epochs == 40);
  CHECK(t.learning_rate == 2e-4);
  CHECK(t.weight_decay == 0.0);
  CHECK(!t.cc_baseline_mode);
  CHECK(t.loss.tau_instance == 0.5);
  CHECK(t.loss.tau_cluster == 1.0);
  CHECK(t.loss.lambda == 2.0);
  CHECK(t.loss.eta == 0.2);
  CHECK(t.loss.entropy_form == EntropyForm::kl_uniform);
  CHECK(t.loss.scch_symmetrize);
  CHECK(c.dedupe_eps == 10.0);
  CHECK(c.eval.moran_threshold == 100.0);
  CHECK(c.map.cell_size == 100.0);
  CHECK(c.augmentation.crop_scale_min == 0.2);
  CHECK(c.augmentation.jitter_prob == 0.8);
  CHECK(c.augmentation.grayscale_prob == 0.2);
  CHECK(c.resolved_city().image_size == 32);
  CHECK(c.resolved_city().distractor_prob == 0.4);
}

TEST_CASE("round trip through json") {
  json doc = json::object();
  apply_override(doc, "train.epochs=7");
  apply_override(doc, "loss.entropy_form=paper");
  apply_override(doc, "model.widths=[8,8,16,16]");
  apply_override(doc, "seed=42");
  const auto c = pipeline_config_from_json(doc);
  CHECK(c.train.epochs == 7);
  CHECK(c.train.loss.entropy_form == EntropyForm::paper);
  CHECK(c.model.widths == std::vector<int>{8, 8, 16, 16});
  CHECK(c.resolved_train().seed == 42);
  CHECK(c.resolved_city().seed == 42);
  const auto again = pipeline_config_from_json(to_json(c));
  CHECK(to_json(again) == to_json(c));
  CHECK(config_hash(to_json(again)) == config_hash(to_json(c)));
  CHECK(config_hash(to_json(c)) != config_hash(to_json(PipelineConfig{})));
}

TEST_CASE("rejections") {
  CHECK_THROWS(pipeline_config_from_json(json::parse(R"({"train": {"epoch": 3}})")));
  CHECK_THROWS(pipeline_config_from_json(json::parse(R"({"bogus": 1})")));
  CHECK_THROWS(pipeline_config_from_json(json::parse(R"({"train": {"epochs": "many"}})")));
  CHECK_THROWS(pipeline_config_from_json(json::parse(R"({"loss": {"tau_instance": -1}})")));
  CHECK_THROWS(pipeline_config_from_json(json::parse(R"({"loss": {"entropy_form": "other"}})")));
  CHECK_THROWS(pipeline_config_from_json(json::parse(R"({"eval": {"moran_weights": "both"}})")));
  json doc = json::object();
  CHECK_THROWS(apply_override(doc, "no_equals_sign"));
}

}  // TEST_SUITE
