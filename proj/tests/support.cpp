#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dialrel/rng.hpp"

namespace testsupport {

using namespace dialrel;

std::vector<double> oracle_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      if (v < x[i]) less += 1;
      if (v == x[i]) equal += 1;
    }
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

long double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<long double>(x.size());
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> tied_vector(std::size_t n, double tie_fraction, std::uint64_t seed) {
  Engine eng(seed);
  std::vector<double> v(n);
  // The first m entries cycle through a pool of about m/3 values, so each
  // pooled value repeats; the rest are continuous draws.
  const auto m = static_cast<std::size_t>(std::ceil(tie_fraction * static_cast<double>(n)));
  const std::size_t pool = std::max<std::size_t>(1, m / 3);
  std::vector<double> values(pool);
  for (auto& a : values) a = std::round(standard_normal(eng) * 4.0);
  for (std::size_t i = 0; i < n; ++i) v[i] = i < m ? values[i % pool] : standard_normal(eng) * 3.0;
  fisher_yates(std::span<double>(v), eng);
  return v;
}

SparseProblem make_sparse_problem(std::size_t n_train, std::size_t n_heldout, std::size_t dim, std::size_t k,
                                  std::uint64_t seed) {
  Engine eng(seed);
  SparseProblem p;
  auto perm = random_permutation(dim, eng);
  p.support.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(p.support.begin(), p.support.end());
  std::vector<double> sign(k);
  for (auto& s : sign) s = uniform_below(eng, 2) ? 1.0 : -1.0;

  auto make = [&](std::size_t n, std::vector<TrainingPair>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      TrainingPair tp;
      tp.context_id = "c" + std::to_string(out.size());
      tp.positive.resize(dim);
      for (auto& v : tp.positive) v = static_cast<float>(0.2 * standard_normal(eng));
      tp.negative = tp.positive;
      for (std::size_t j = 0; j < k; ++j) {
        const double half = 2.0 * (1.0 + 0.3 * standard_normal(eng));
        tp.positive[p.support[j]] = static_cast<float>(sign[j] * half);
        tp.negative[p.support[j]] = static_cast<float>(-sign[j] * half);
      }
      out.push_back(std::move(tp));
    }
  };
  make(n_train, p.train);
  make(n_heldout, p.heldout);
  return p;
}

double ranking_accuracy(const RelevanceModel& model, const std::vector<TrainingPair>& pairs) {
  std::size_t ok = 0;
  for (const auto& tp : pairs) {
    if (forward(model, std::span<const float>(tp.positive)) > forward(model, std::span<const float>(tp.negative))) {
      ++ok;
    }
  }
  return static_cast<double>(ok) / static_cast<double>(pairs.size());
}

SyntheticSet make_synthetic_set(Dataset dataset, std::size_t n_train_ctx, std::size_t n_test_ctx,
                                std::uint32_t dim, double signal, std::uint64_t seed) {
  Engine eng(seed);
  SyntheticSet out{Corpus{}, FeatureStore(dim)};
  out.corpus.dataset = dataset;
  out.corpus.provenance = "synthetic";
  const auto& prof = profile(dataset);
  const std::size_t k = std::min<std::size_t>(7, dim);
  // Separator dims and signs are fixed per dimension so that every synthetic
  // set shares the same relevance direction.
  Engine shared(12345);
  std::vector<double> sign(k);
  for (auto& s : sign) s = uniform_below(shared, 2) ? 1.0 : -1.0;

  auto vec = [&](const std::vector<float>& ctx, double rel) {
    std::vector<float> v(ctx);
    for (std::size_t j = 0; j < k; ++j) v[j] = static_cast<float>(ctx[j] + sign[j] * rel * signal);
    for (std::size_t j = k; j < dim; ++j) v[j] = static_cast<float>(v[j] + 0.05 * standard_normal(eng));
    return v;
  };
  auto rating = [&](double rel) {
    const double lo = prof.likert_min, hi = prof.likert_max;
    const double mid = lo + (hi - lo) * (0.5 + 0.4 * std::tanh(rel));
    return std::clamp(std::round(mid + 0.8 * standard_normal(eng)), lo, hi);
  };

  std::vector<std::vector<float>> ctx_vecs;
  for (std::size_t c = 0; c < n_train_ctx + n_test_ctx; ++c) {
    const bool is_train = c < n_train_ctx;
    const std::string cid = std::string(to_string(dataset)) + "-c" + std::to_string(c);
    std::vector<float> ctx(dim);
    for (auto& v : ctx) v = static_cast<float>(0.2 * standard_normal(eng));
    ctx_vecs.push_back(ctx);
    for (int r = 0; r < 2; ++r) {
      EvalExample ex;
      ex.id = cid + "-r" + std::to_string(r);
      ex.dataset = dataset;
      ex.split = is_train ? Split::train : Split::test;
      ex.context_id = cid;
      ex.context.turns = {{0, "turn one of " + cid}, {1, "turn two of " + cid}};
      ex.response.text = (r == 0 ? "on-topic reply " : "random reply ") + std::to_string(c);
      ex.response.source = r == 0 ? ResponseSource::human : ResponseSource::random_human;
      const double rel = (r == 0 ? 1.0 : -1.0) * (0.3 + uniform_unit(eng)) + 0.5 * standard_normal(eng);
      for (int a = 0; a < 3; ++a) ex.response.ratings.push_back(rating(rel));
      ex.response.mean_rating = mean_rating(ex.response.ratings);
      out.store.add({ex.id, FeatureKind::PAIR_NSP, dim, vec(ctx, rel), 0.0, 0, {}, "synthetic"});
      out.corpus.examples.push_back(std::move(ex));
    }
    if (is_train) {
      out.store.add({negative_key(cid, kDefaultNegative), FeatureKind::PAIR_NSP_NEG, dim, vec(ctx, -1.5), 0.0, 0, {},
                     "synthetic"});
      out.store.add({shuffled_key(cid), FeatureKind::PAIR_NSP_NEG, dim, vec(ctx, -0.8 - uniform_unit(eng)), 0.0, 0,
                     {}, "synthetic"});
    }
  }
  return out;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dialrel_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport

namespace testsupport {

double max_gradient_error(LossKind loss, Regularizer reg, std::size_t instances, std::uint64_t seed) {
  Engine eng(seed);
  double worst = 0.0;
  std::size_t done = 0;
  while (done < instances) {
    const std::size_t dim = 3 + uniform_below(eng, 6);
    const std::size_t n = 1 + uniform_below(eng, 6);
    Objective obj;
    obj.loss = loss;
    obj.regularizer = reg;
    obj.lambda = 0.1 + uniform_unit(eng);
    obj.margin = 0.4;
    obj.dim = dim;
    std::vector<TrainingPair> pairs(n);
    for (auto& p : pairs) {
      p.positive.resize(dim);
      p.negative.resize(dim);
      for (auto& v : p.positive) v = static_cast<float>(standard_normal(eng));
      for (auto& v : p.negative) v = static_cast<float>(standard_normal(eng));
    }
    std::vector<const TrainingPair*> batch;
    for (const auto& p : pairs) batch.push_back(&p);
    std::vector<double> params(obj.parameter_count());
    for (auto& v : params) {
      // Keep weights off the L1 kink at zero.
      v = 0.5 * standard_normal(eng);
      if (std::abs(v) < 0.05) v = v < 0 ? -0.05 : 0.05;
    }
    if (loss == LossKind::triplet_mod) {
      // Skip draws where some pair sits near the hinge of max(., 0).
      bool near_hinge = false;
      for (const auto& p : pairs) {
        RelevanceModel m;
        m.weights.assign(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(dim));
        m.bias = params[dim];
        const double raw = forward(m, std::span<const float>(p.positive)) -
                           forward(m, std::span<const float>(p.negative)) + obj.margin;
        if (std::abs(raw) < 1e-3) near_hinge = true;
      }
      if (near_hinge) continue;
    }
    std::vector<double> analytic(params.size());
    obj.evaluate(params, batch, analytic);
    std::vector<double> numeric(params.size());
    const double h = 1e-6;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto plus = params, minus = params;
      plus[i] += h;
      minus[i] -= h;
      numeric[i] = (obj.evaluate(plus, batch, {}) - obj.evaluate(minus, batch, {})) / (2 * h);
    }
    double diff = 0, na = 0, nn = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
    worst = std::max(worst, std::sqrt(diff) / denom);
    ++done;
  }
  return worst;
}

}  // namespace testsupport
