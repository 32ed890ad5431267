#include <gtest/gtest.h>

#include <filesystem>

#include "madgan/checkpoint.hpp"
#include "madgan/errors.hpp"
#include "madgan/sample_io.hpp"
#include "madgan/trainer.hpp"

namespace madgan::train {
namespace {

namespace fs = std::filesystem;
using config::TrainConfig;
using config::Variant;

TrainConfig tiny(Variant v = Variant::kMadgan, std::size_t k = 2) {
  TrainConfig c;
  c.variant = v;
  c.k = k;
  c.batch_size = 16;
  c.iterations = 40;
  c.dataset_size = 2000;
  c.noise_dim = 4;
  c.gen_hidden = 8;
  c.disc_hidden = 8;
  c.learning_rate = 1e-3;
  c.eval.every = 20;
  c.eval.periodic_samples = 500;
  c.eval.final_samples = 1000;
  return c;
}

std::map<std::string, Tensor> gen_params(const TrainState& s) { return models::parameter_values(s.generators().registry()); }
std::map<std::string, Tensor> disc_params(const TrainState& s) {
  return models::parameter_values(s.discriminator().registry());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

TEST(TrainLog, CsvSchema) {
  TrainLog log;
  log.k = 2;
  log.rows.push_back({1, 1.5, {-0.25, 0.125}, std::nullopt});
  log.rows.push_back({2, 1.25, {-0.5, 0.0625}, PeriodicMetrics{0.75, 12.5, 5}});
  EXPECT_EQ(log.header(), "step,d_loss,g1_loss,g2_loss,kl,chi2,modes");
  const std::string csv = log.to_csv();
  EXPECT_EQ(csv, "step,d_loss,g1_loss,g2_loss,kl,chi2,modes\n1,1.5,-0.25,0.125,,,\n2,1.25,-0.5,0.0625,0.75,12.5,5\n");
  const TrainLog back = TrainLog::from_csv(csv);
  EXPECT_EQ(back.k, 2u);
  EXPECT_EQ(back.to_csv(), csv);
  EXPECT_THROW(TrainLog::from_csv("nope\n"), ParseError);
  EXPECT_THROW(TrainLog::from_csv("step,d_loss,g1_loss,kl,chi2,modes\n1,2\n"), ParseError);
  EXPECT_THROW(TrainLog::from_csv("step,d_loss,g1_loss,kl,chi2,modes\n1,x,2,,,\n"), ParseError);
}

TEST(TrainState, ZeroIterationsLeaveInitialization) {
  const TrainConfig c = tiny();
  const TrainState s(c);
  const models::GeneratorBank bank(c.generator_spec(), c.seed);
  const models::Discriminator d(c.discriminator_spec(), c.seed);
  EXPECT_EQ(gen_params(s), models::parameter_values(bank.registry()));
  EXPECT_EQ(disc_params(s), models::parameter_values(d.registry()));
  EXPECT_EQ(s.step(), 0u);
  EXPECT_EQ(s.dataset().size(), 2000u);
}

TEST(TrainState, DatasetIsStandardizedUnlessDisabled) {
  TrainConfig c = tiny();
  const TrainState s(c);
  double mean = 0.0;
  for (double x : s.dataset()) mean += x;
  EXPECT_NEAR(mean / 2000.0, 0.0, 0.1);
  EXPECT_NEAR(s.transform().to_data(0.0), 56.0, 1e-12);
  c.standardize = false;
  const TrainState raw(c);
  EXPECT_EQ(raw.transform().shift, 0.0);
  EXPECT_EQ(raw.transform().scale, 1.0);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(raw.dataset()[i], s.transform().to_data(s.dataset()[i]), 1e-9);
}

TEST(Train, FixedSeedRunsAreIdentical) {
  for (Variant v : {Variant::kMadgan, Variant::kMagan, Variant::kMadganSim}) {
    const auto a = train(tiny(v));
    const auto b = train(tiny(v));
    EXPECT_EQ(a.log.to_csv(), b.log.to_csv()) << config::variant_name(v);
    EXPECT_EQ(a.log.rows.size(), 40u);
    EXPECT_EQ(gen_params(a.state), gen_params(b.state));
    ASSERT_TRUE(a.final_eval.has_value());
    EXPECT_EQ(a.final_eval->report.to_json(), b.final_eval->report.to_json());
  }
  TrainConfig other = tiny();
  other.seed = 2;
  EXPECT_NE(train(tiny()).log.to_csv(), train(other).log.to_csv());
}

TEST(Train, LossesAreFiniteAndMetricsPeriodic) {
  const auto r = train(tiny(Variant::kMadgan, 3));
  for (const auto& row : r.log.rows) {
    EXPECT_TRUE(std::isfinite(row.d_loss));
    for (double g : row.g_loss) EXPECT_TRUE(std::isfinite(g));
    EXPECT_EQ(row.metrics.has_value(), row.step % 20 == 0) << row.step;
  }
}

TEST(Train, ResumeReproducesUninterruptedLog) {
  for (Variant v : {Variant::kMadgan, Variant::kMadganSim}) {
    const TrainConfig c = tiny(v);
    const auto full = train(c);
    TrainOptions first;
    first.stop_at = 17;
    const auto part = train(c, first);
    EXPECT_FALSE(part.final_eval.has_value());
    const Checkpoint ckpt = checkpoint_from_json(checkpoint_to_json(part.state.to_checkpoint()));
    TrainLog prior = TrainLog::from_csv(part.log.to_csv());
    // Rows logged past the checkpoint are dropped on resume.
    prior.rows.push_back({99, 0.0, {0.0, 0.0}, std::nullopt});
    const auto rest = resume(ckpt, prior);
    EXPECT_EQ(rest.log.to_csv(), full.log.to_csv());
    EXPECT_EQ(gen_params(rest.state), gen_params(full.state));
    EXPECT_EQ(rest.final_eval->report.to_json(), full.final_eval->report.to_json());
  }
}

TEST(Train, RunDirectoryArtifacts) {
  TrainConfig c = tiny();
  c.checkpoint_every = 20;
  const fs::path dir = fresh_dir("madgan-run-test");
  TrainOptions o;
  o.run_dir = dir;
  const auto r = train(c, o);
  for (const char* f : {"log.csv", "ckpt-20.json", "ckpt-40.json", "ckpt-final.json", "report.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(io::read_text(dir / "log.csv"), r.log.to_csv());
  const Checkpoint ckpt = load_checkpoint(dir / "ckpt-20.json");
  EXPECT_EQ(ckpt.step, 20u);
  EXPECT_EQ(ckpt.config_json, config::canonical_json(c));

  // Resuming into a new directory rewrites the log prefix and continues.
  const fs::path dir2 = fresh_dir("madgan-run-test2");
  TrainOptions o2;
  o2.run_dir = dir2;
  resume(ckpt, TrainLog::from_csv(io::read_text(dir / "log.csv")), o2);
  EXPECT_EQ(io::read_text(dir2 / "log.csv"), r.log.to_csv());
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST(Train, NonFiniteLossAbortsWithDiagnosticCheckpoint) {
  TrainConfig c = tiny();
  // One Adam step moves every weight by about lr, so the next forward pass overflows.
  c.learning_rate = 1e300;
  const fs::path dir = fresh_dir("madgan-nan-test");
  TrainOptions o;
  o.run_dir = dir;
  EXPECT_THROW(train(c, o), NumericError);
  EXPECT_TRUE(fs::exists(dir / "ckpt-nan.json"));
  fs::remove_all(dir);
}

TEST(TrainStep, NonFiniteLeavesGeneratorsUntouched) {
  TrainState s(tiny());
  const auto before = gen_params(s);
  s.discriminator().registry().find("disc.layer3.bias")->value()[0] = std::nan("");
  EXPECT_THROW(train_step(s), NumericError);
  EXPECT_EQ(gen_params(s), before);
  EXPECT_EQ(s.step(), 0u);
}

TEST(TrainStep, GeneratorOrderDoesNotMatter) {
  for (Variant v : {Variant::kMadgan, Variant::kMagan, Variant::kMadganSim}) {
    TrainState a(tiny(v, 4)), b(tiny(v, 4)), c(tiny(v, 4));
    for (int step = 0; step < 10; ++step) {
      train_step(a);
      train_step(b, StepOptions{{3, 2, 1, 0}});
      train_step(c, StepOptions{{2, 0, 3, 1}});
    }
    EXPECT_EQ(gen_params(a), gen_params(b));
    EXPECT_EQ(gen_params(a), gen_params(c));
    EXPECT_EQ(disc_params(a), disc_params(c));
  }
  TrainState s(tiny(Variant::kMadgan, 2));
  EXPECT_THROW(train_step(s, StepOptions{{0, 0}}), ContractError);
  EXPECT_THROW(train_step(s, StepOptions{{0}}), ContractError);
}

TEST(TrainStep, SingleGeneratorUpdateMovesTrunkNotOtherHeads) {
  TrainState s(tiny(Variant::kMadgan, 3));
  const auto before = gen_params(s);
  ad::Tape tape;
  for (const auto& p : s.discriminator().parameters()) tape.freeze(*p);
  Rng rng(1);
  const Tensor z = s.generators().sample_noise(16, rng);
  const ad::Var loss = objectives::gen_loss_madgan(tape, s.discriminator(), s.generators().generate(tape, 1, tape.constant(z)),
                                                   objectives::GenLossKind::kSaturating);
  s.generator_optimizer().step(tape.backward(loss));
  const auto after = gen_params(s);
  for (const auto& [name, value] : after) {
    if (name.rfind("gen_shared", 0) == 0 || name.rfind("gen2.", 0) == 0) {
      EXPECT_NE(value, before.at(name)) << name;
    } else {
      EXPECT_EQ(value, before.at(name)) << name;
    }
  }
}

TEST(TrainStep, SnapshotAndReductionSwitchesChangeTheUpdate) {
  TrainConfig base = tiny(Variant::kMadgan, 3);
  TrainConfig pre = base;
  pre.disc_snapshot = config::DiscSnapshot::kPreUpdate;
  TrainConfig mean = base;
  mean.trunk_reduction = config::TrunkReduction::kMean;
  TrainState a(base), b(pre), c(mean);
  for (int i = 0; i < 3; ++i) {
    train_step(a);
    train_step(b);
    train_step(c);
  }
  EXPECT_NE(gen_params(a), gen_params(b));
  EXPECT_NE(gen_params(a), gen_params(c));
}

TEST(TrainStep, MaganSingleGeneratorMatchesHandWrittenGan) {
  const TrainConfig c = tiny(Variant::kMagan, 1);
  TrainState s(c);
  // Independent copy of the networks, trained with explicitly written losses.
  models::GeneratorBank g = s.generators().clone();
  models::Discriminator d = s.discriminator().clone();
  nn::Adam gopt(g.parameters(), {c.learning_rate, c.beta1, c.beta2, c.epsilon});
  nn::Adam dopt(d.parameters(), {c.learning_rate, c.beta1, c.beta2, c.epsilon});
  const auto& data = s.dataset();
  for (std::uint64_t t = 0; t < 20; ++t) {
    const LogRow row = train_step(s);

    Rng pick(derive_seed(c.seed, {static_cast<std::uint64_t>(Stream::kRealBatch), t, 0}));
    std::vector<double> real(c.batch_size);
    for (double& x : real) x = data[pick.below(data.size())];
    Rng dn(derive_seed(c.seed, {static_cast<std::uint64_t>(Stream::kDiscNoise), t, 0, 0}));
    const Tensor fake = g.generate(0, g.sample_noise(c.batch_size, dn));
    ad::Tape td;
    const ad::Var lr = d.logits(td, td.constant(Tensor::column(real)));
    const ad::Var lf = d.logits(td, td.constant(fake));
    // -log sigmoid(l) = softplus(-l); -log(1 - sigmoid(l)) = softplus(l)
    const ad::Var dloss = ad::add(ad::mean(ad::softplus(ad::neg(lr))), ad::mean(ad::softplus(lf)));
    EXPECT_NEAR(dloss.value().item(), row.d_loss, 1e-12);
    dopt.step(td.backward(dloss));

    Rng gn(derive_seed(c.seed, {static_cast<std::uint64_t>(Stream::kGenNoise), t, 0}));
    const Tensor z = g.sample_noise(c.batch_size, gn);
    ad::Tape tg;
    for (const auto& p : d.parameters()) tg.freeze(*p);
    // log(1 - sigmoid(l)) = -softplus(l)
    const ad::Var gloss = ad::neg(ad::mean(ad::softplus(d.logits(tg, g.generate(tg, 0, tg.constant(z))))));
    EXPECT_NEAR(gloss.value().item(), row.g_loss[0], 1e-9);
    gopt.step(tg.backward(gloss));
  }
  const auto mine = models::parameter_values(g.registry());
  for (const auto& [name, value] : gen_params(s)) {
    for (std::size_t i = 0; i < value.size(); ++i) EXPECT_NEAR(value[i], mine.at(name)[i], 1e-9) << name;
  }
}

TEST(Pool, EqualSharesAndTags) {
  const models::GeneratorBank bank(models::GeneratorSpec{.k = 4, .noise_dim = 4, .hidden = 8}, 1);
  const auto p = generate_pool(bank, 8, 3);
  EXPECT_EQ(p.size(), 8u);
  EXPECT_EQ(p.generator_ids, (std::vector<std::uint32_t>{0, 0, 1, 1, 2, 2, 3, 3}));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(p.from_generator(i).size(), 2u);
  const auto odd = generate_pool(bank, 10, 3);
  EXPECT_EQ(odd.from_generator(0).size(), 3u);
  EXPECT_EQ(odd.from_generator(1).size(), 3u);
  EXPECT_EQ(odd.from_generator(2).size(), 2u);
  EXPECT_EQ(odd.from_generator(3).size(), 2u);
  EXPECT_EQ(generate_pool(bank, 8, 3).values, p.values);
  EXPECT_NE(generate_pool(bank, 8, 4).values, p.values);
}

TEST(Pool, FromCheckpointIsDeterministicAndInDataCoordinates) {
  const auto r = train(tiny());
  const Checkpoint ckpt = r.state.to_checkpoint();
  const auto a = generate_pool(ckpt, 1000, 5);
  EXPECT_EQ(a.values, generate_pool(ckpt, 1000, 5).values);
  EXPECT_EQ(a.values, generate_pool(r.state.generators(), 1000, 5, r.state.transform()).values);
  double mean = 0.0;
  for (double v : a.values) mean += v;
  mean /= 1000.0;
  EXPECT_GT(mean, 0.0);
  EXPECT_LT(mean, 120.0);
}

TEST(FromCheckpoint, RejectsInconsistentState) {
  Checkpoint ckpt = TrainState(tiny()).to_checkpoint();
  ckpt.seed = 99;
  EXPECT_THROW(TrainState::from_checkpoint(ckpt), ParseError);
  ckpt = TrainState(tiny()).to_checkpoint();
  ckpt.parameters.erase("gen1.layer3.weight");
  EXPECT_THROW(TrainState::from_checkpoint(ckpt), ParseError);
}

}  // namespace
}  // namespace madgan::train
