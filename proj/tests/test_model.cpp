#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "fyseq/checkpoint.hpp"
#include "fyseq/model.hpp"
#include "fyseq/train.hpp"
#include "helpers.hpp"

using namespace fyseq;
using Catch::Approx;

namespace {

Vocabulary small_vocab() {
  Vocabulary v;
  for (const char* t : {"a", "b", "c", "d"}) v.add(t);
  return v;
}

Seq2SeqModel small_model(double alpha, double eps, std::uint64_t seed = 42) {
  ModelDims dims;
  dims.embed_dim = 8;
  dims.hidden_dim = 12;
  dims.context_len = 3;
  return Seq2SeqModel::init(small_vocab(), dims, SmoothingSpec(Alpha(alpha), eps), seed);
}

std::vector<SequencePair> tiny_batch(const Vocabulary& v) {
  const int a = v.index_of("a"), b = v.index_of("b"), c = v.index_of("c"), d = v.index_of("d");
  const int eos = Vocabulary::kEos;
  return {
      {{a, b, c}, {a, b, c, eos}},
      {{b, b}, {d, eos}},
      {{c, a, d, b}, {c, a, d, b, eos}},
  };
}

}  // namespace

TEST_CASE("forward step shape and determinism") {
  const auto model = small_model(1.5, 0.0);
  const std::vector<int> source = {3, 4, 5};
  const std::vector<int> prefix = {4};
  const auto z1 = forward_step(model, source, prefix);
  const auto z2 = forward_step(model, source, prefix);
  CHECK(z1.size() == model.vocab.size());
  CHECK(z1 == z2);  // bitwise

  for (double v : z1) CHECK(std::isfinite(v));
}

TEST_CASE("unknown token indices are rejected") {
  const auto model = small_model(1.0, 0.0);
  CHECK_THROWS_AS(forward_step(model, std::vector<int>{99}, std::vector<int>{}), UnknownToken);
  CHECK_THROWS_AS(forward_step(model, std::vector<int>{3}, std::vector<int>{-1}), UnknownToken);
}

TEST_CASE("pad-only suffix does not change logits") {
  const auto model = small_model(1.5, 0.0);
  const std::vector<int> source = {3, 5, 4};
  std::vector<int> padded = source;
  padded.push_back(Vocabulary::kPad);
  padded.push_back(Vocabulary::kPad);
  const auto z = forward_step(model, source, std::vector<int>{4, 6});
  const auto zp = forward_step(model, padded, std::vector<int>{4, 6});
  CHECK(z == zp);  // bitwise: masked positions never enter any sum
}

TEST_CASE("bos padding fills short prefixes") {
  const auto model = small_model(1.5, 0.0);
  const std::vector<int> source = {3, 4};
  // empty prefix is legal and deterministic
  const auto z0 = forward_step(model, source, std::vector<int>{});
  CHECK(z0.size() == model.vocab.size());
}

TEST_CASE("sequence log prob follows the chain rule") {
  const auto model = small_model(1.5, 0.0);
  const SequencePair pair{{3, 4, 5}, {5, 4, 3, Vocabulary::kEos}};
  const auto dists = forced_decode(model, pair);
  REQUIRE(dists.size() == pair.target.size());

  double manual = 0.0;
  bool hit_zero = false;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    const double p = dists[i].probabilities[static_cast<std::size_t>(pair.target[i])];
    if (p == 0.0) hit_zero = true;
    if (!hit_zero) manual += std::log(p);
  }
  const double got = sequence_log_prob(model, pair);
  if (hit_zero) {
    CHECK(std::isinf(got));
    CHECK(got < 0);
  } else {
    CHECK(got == Approx(manual).margin(1e-12));
    // chain rule: cumulative log prob is monotonically nonincreasing
    double running = 0.0;
    for (std::size_t i = 0; i < dists.size(); ++i) {
      const double prev = running;
      running += std::log(dists[i].probabilities[static_cast<std::size_t>(pair.target[i])]);
      CHECK(running <= prev + 1e-12);
    }
  }
}

TEST_CASE("zero-probability gold step yields the -infinity sentinel") {
  auto model = small_model(2.0, 0.0);
  const int dead = model.vocab.index_of("d");
  // a large negative output bias drives sparsemax probability to exactly zero
  model.output_bias.at(static_cast<std::size_t>(dead), 0) = -50.0;
  const SequencePair pair{{3, 4}, {dead, Vocabulary::kEos}};
  CHECK(sequence_log_prob(model, pair) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("forced decode distributions are simplex points") {
  for (double alpha : {1.0, 1.5, 2.0}) {
    const auto model = small_model(alpha, 0.0);
    const SequencePair pair{{3, 4, 5}, {5, 4, Vocabulary::kEos}};
    const auto dists = forced_decode(model, pair);
    CHECK(dists.size() == pair.target.size());
    for (const auto& d : dists) {
      CHECK(testutil::sum(d.probabilities) == Approx(1.0).margin(1e-9));
      for (double p : d.probabilities) CHECK(p >= 0.0);
      if (alpha == 1.0) CHECK(d.support.size() == model.vocab.size());
    }
  }
}

TEST_CASE("batch gradients match finite differences") {
  const auto vocab = small_vocab();
  const auto batch = tiny_batch(vocab);
  Rng coord_rng(913);

  for (double alpha : {1.0, 1.5, 2.0}) {
    for (double eps : {0.0, 0.01, 0.1}) {
      auto model = small_model(alpha, eps, 7);
      ParamBlock grads = ParamBlock::zeros_like(model);
      batch_loss_and_gradients(model, batch, grads);

      const double step = 1e-4;
      model.for_each_parameter([&](const char* name, Matrix& param) {
        Matrix* gmat = nullptr;
        grads.for_each([&](const char* gname, Matrix& g) {
          if (std::string(gname) == name) gmat = &g;
        });
        REQUIRE(gmat != nullptr);
        const std::size_t samples = std::min<std::size_t>(20, param.data.size());
        for (std::size_t s = 0; s < samples; ++s) {
          const std::size_t idx = coord_rng.below(param.data.size());
          const double saved = param.data[idx];
          param.data[idx] = saved + step;
          ParamBlock scratch = ParamBlock::zeros_like(model);
          const double up = batch_loss_and_gradients(model, batch, scratch);
          param.data[idx] = saved - step;
          scratch = ParamBlock::zeros_like(model);
          const double down = batch_loss_and_gradients(model, batch, scratch);
          param.data[idx] = saved;

          const double fd = (up - down) / (2.0 * step);
          const double an = gmat->data[idx];
          const double tol = std::max(1e-8, 1e-4 * std::max(std::abs(fd), std::abs(an)));
          INFO(name << "[" << idx << "] alpha=" << alpha << " eps=" << eps
                    << " fd=" << fd << " an=" << an);
          CHECK(std::abs(fd - an) <= tol);
        }
      });
    }
  }
}

TEST_CASE("duplicating the batch leaves loss and gradients unchanged") {
  const auto vocab = small_vocab();
  const auto batch = tiny_batch(vocab);
  std::vector<SequencePair> doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());

  const auto model = small_model(1.5, 0.1);
  ParamBlock g1 = ParamBlock::zeros_like(model);
  ParamBlock g2 = ParamBlock::zeros_like(model);
  const double l1 = batch_loss_and_gradients(model, batch, g1);
  const double l2 = batch_loss_and_gradients(model, doubled, g2);
  CHECK(l1 == Approx(l2).margin(1e-12));
  g1.for_each([&](const char* name, Matrix& a) {
    g2.for_each([&](const char* other, Matrix& b) {
      if (std::string(name) != other) return;
      CHECK(testutil::max_abs_diff(a.data, b.data) < 1e-9);
    });
  });
}

TEST_CASE("unsmoothed alpha=1 batch loss is mean token cross-entropy") {
  const auto vocab = small_vocab();
  const auto batch = tiny_batch(vocab);
  const auto model = small_model(1.0, 0.0);
  ParamBlock grads = ParamBlock::zeros_like(model);
  const double loss = batch_loss_and_gradients(model, batch, grads);

  double manual = 0.0;
  std::size_t tokens = 0;
  for (const auto& pair : batch) {
    for (const auto& dist : forced_decode(model, pair)) {
      (void)dist;
    }
    const auto dists = forced_decode(model, pair);
    for (std::size_t i = 0; i < dists.size(); ++i) {
      manual += -std::log(dists[i].probabilities[static_cast<std::size_t>(pair.target[i])]);
      ++tokens;
    }
  }
  CHECK(loss == Approx(manual / static_cast<double>(tokens)).margin(1e-10));
}

TEST_CASE("adam basics") {
  auto model = small_model(1.5, 0.0);
  AdamState state = AdamState::init(model);

  // zero gradients leave parameters untouched
  const auto before = model.output_weights.data;
  ParamBlock zero = ParamBlock::zeros_like(model);
  adam_step(state, model, zero, 0.01);
  CHECK(model.output_weights.data == before);
  CHECK(state.step == 1);

  // unit gradients move every coordinate by about -lr on the first step
  auto fresh = small_model(1.5, 0.0, 11);
  AdamState s2 = AdamState::init(fresh);
  ParamBlock ones = ParamBlock::zeros_like(fresh);
  ones.for_each([](const char*, Matrix& g) {
    for (double& v : g.data) v = 1.0;
  });
  const double w0 = fresh.hidden_bias.at(0, 0);
  adam_step(s2, fresh, ones, 0.01);
  CHECK(fresh.hidden_bias.at(0, 0) == Approx(w0 - 0.01).epsilon(1e-6));
}

TEST_CASE("identical seeds produce identical models and training runs") {
  const auto a = small_model(1.5, 0.0, 123);
  const auto b = small_model(1.5, 0.0, 123);
  CHECK(a.hidden_weights.data == b.hidden_weights.data);
  const auto c = small_model(1.5, 0.0, 124);
  CHECK(a.hidden_weights.data != c.hidden_weights.data);

  const auto vocab = small_vocab();
  const auto pairs = tiny_batch(vocab);
  TrainConfig config;
  config.max_epochs = 3;
  config.patience = 10;
  config.batch_size = 2;
  config.seed = 5;
  auto r1 = train(small_model(1.5, 0.0, 5), pairs, pairs, config);
  auto r2 = train(small_model(1.5, 0.0, 5), pairs, pairs, config);
  REQUIRE(r1.log.size() == r2.log.size());
  for (std::size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].train_loss == r2.log[i].train_loss);  // bitwise
    CHECK(r1.log[i].dev_lev == r2.log[i].dev_lev);
  }
  CHECK(r1.model.output_weights.data == r2.model.output_weights.data);
}

TEST_CASE("training loss stays finite even with sparse zero-probability steps") {
  const auto vocab = small_vocab();
  const auto pairs = tiny_batch(vocab);
  TrainConfig config;
  config.max_epochs = 5;
  config.patience = 10;
  config.batch_size = 3;
  config.learning_rate = 0.01;
  config.seed = 3;
  const auto result = train(small_model(2.0, 0.0, 3), pairs, pairs, config);
  for (const auto& epoch : result.log) CHECK(std::isfinite(epoch.train_loss));
}

TEST_CASE("patience zero stops after the first non-improving epoch") {
  const auto vocab = small_vocab();
  const auto pairs = tiny_batch(vocab);
  TrainConfig config;
  config.max_epochs = 10;
  config.patience = 0;
  config.learning_rate = 0.0;  // nothing improves
  config.seed = 9;
  const auto result = train(small_model(1.5, 0.0, 9), pairs, pairs, config);
  CHECK(result.log.size() == 2);  // epoch 1 sets the baseline, epoch 2 fails to improve
  CHECK(result.best_epoch == 1);
}

TEST_CASE("empty datasets are rejected") {
  const auto vocab = small_vocab();
  const auto pairs = tiny_batch(vocab);
  TrainConfig config;
  CHECK_THROWS_AS(train(small_model(1.5, 0.0), {}, pairs, config), EmptyDataset);
  CHECK_THROWS_AS(train(small_model(1.5, 0.0), pairs, {}, config), EmptyDataset);
}

TEST_CASE("checkpoint round trip preserves everything") {
  const auto dir = std::filesystem::temp_directory_path() / "fyseq_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.fys").string();

  auto model = small_model(1.5, 0.05, 77);
  save_checkpoint(model, path);
  const auto loaded = load_checkpoint(path);

  CHECK(loaded.vocab == model.vocab);
  CHECK(loaded.dims.embed_dim == model.dims.embed_dim);
  CHECK(loaded.dims.hidden_dim == model.dims.hidden_dim);
  CHECK(loaded.dims.context_len == model.dims.context_len);
  CHECK(loaded.smoothing.alpha.value() == 1.5);
  CHECK(loaded.smoothing.epsilon == 0.05);
  CHECK(loaded.source_embeddings.data == model.source_embeddings.data);  // bitwise
  CHECK(loaded.output_bias.data == model.output_bias.data);

  // logits agree bitwise after reload
  const std::vector<int> source = {3, 4, 5};
  CHECK(forward_step(model, source, std::vector<int>{3}) ==
        forward_step(loaded, source, std::vector<int>{3}));

  // corrupt magic is rejected
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE";
  }
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("explicit smoothing distributions survive the checkpoint") {
  const auto dir = std::filesystem::temp_directory_path() / "fyseq_ckpt_r";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.fys").string();

  const auto vocab = small_vocab();
  std::vector<double> r(vocab.size(), 0.0);
  r[3] = 0.5;
  r[4] = 0.5;
  ModelDims dims;
  dims.embed_dim = 8;
  dims.hidden_dim = 12;
  auto model = Seq2SeqModel::init(
      vocab, dims, SmoothingSpec(Alpha(2.0), 0.2, TargetDistribution::general(r)), 8);
  save_checkpoint(model, path);
  const auto loaded = load_checkpoint(path);
  REQUIRE(loaded.smoothing.smoothing_distribution.has_value());
  CHECK(loaded.smoothing.smoothing_distribution->probabilities == r);
  std::filesystem::remove_all(dir);
}
