#include "dialrel/idkcore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dialrel/errors.hpp"
#include "dialrel/rng.hpp"

namespace dialrel {

using nlohmann::json;

namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

template <typename T>
double dot(std::span<const double> w, std::span<const T> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * static_cast<double>(x[i]);
  return s;
}

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

json config_to_json(const TrainConfig& c) {
  return json{{"feature_kind", to_string(c.feature_kind)},
              {"loss", to_string(c.loss)},
              {"regularizer", to_string(c.regularizer)},
              {"lambda", c.lambda},
              {"negatives", c.negatives == NegativeScheme::shuffled ? "shuffled" : "fixed_text"},
              {"negative_texts", c.negative_texts},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"seed", c.seed},
              {"margin", c.margin},
              {"triplet_orientation", to_string(c.triplet_orientation)},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.feature_kind = parse_feature_kind(j.value("feature_kind", std::string("PAIR_NSP")));
  c.loss = parse_loss(j.at("loss").get<std::string>());
  c.regularizer = parse_regularizer(j.at("regularizer").get<std::string>());
  c.lambda = j.at("lambda").get<double>();
  c.negatives = j.at("negatives").get<std::string>() == "shuffled" ? NegativeScheme::shuffled
                                                                   : NegativeScheme::fixed_text;
  c.negative_texts = j.value("negative_texts", std::vector<std::string>{});
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.margin = j.value("margin", 0.4);
  c.triplet_orientation = parse_triplet_orientation(j.value("triplet_orientation", std::string("published")));
  c.adam_beta1 = j.value("adam_beta1", 0.9);
  c.adam_beta2 = j.value("adam_beta2", 0.999);
  c.adam_eps = j.value("adam_eps", 1e-8);
  return c;
}

}  // namespace

std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::bce_sigmoid: return "bce";
    case LossKind::bce_softmax2: return "bce-softmax2";
    case LossKind::triplet_mod: return "triplet";
  }
  return "?";
}

std::string_view to_string(Regularizer r) {
  switch (r) {
    case Regularizer::none: return "none";
    case Regularizer::l1: return "l1";
    case Regularizer::l2: return "l2";
  }
  return "?";
}

std::string_view to_string(TripletOrientation o) {
  return o == TripletOrientation::published ? "published" : "swapped";
}

LossKind parse_loss(std::string_view s) {
  if (s == "bce" || s == "bce_sigmoid") return LossKind::bce_sigmoid;
  if (s == "bce-softmax2" || s == "bce_softmax2") return LossKind::bce_softmax2;
  if (s == "triplet" || s == "triplet_mod") return LossKind::triplet_mod;
  throw std::invalid_argument("unknown loss: " + std::string(s));
}

Regularizer parse_regularizer(std::string_view s) {
  if (s == "none") return Regularizer::none;
  if (s == "l1") return Regularizer::l1;
  if (s == "l2") return Regularizer::l2;
  throw std::invalid_argument("unknown regularizer: " + std::string(s));
}

TripletOrientation parse_triplet_orientation(std::string_view s) {
  if (s == "published") return TripletOrientation::published;
  if (s == "swapped") return TripletOrientation::swapped;
  throw std::invalid_argument("unknown triplet orientation: " + std::string(s));
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (loss == LossKind::triplet_mod && !(margin > 0.0)) throw std::invalid_argument("margin must be > 0");
  if (negatives == NegativeScheme::fixed_text && negative_texts.empty()) {
    throw std::invalid_argument("fixed negatives need at least one text");
  }
}

std::string TrainConfig::fingerprint() const { return config_to_json(*this).dump(); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double forward(const RelevanceModel& model, std::span<const float> x) {
  if (x.size() != model.dim()) {
    throw std::invalid_argument("feature dim " + std::to_string(x.size()) + " != model dim " +
                                std::to_string(model.dim()));
  }
  return sigmoid(dot(std::span<const double>(model.weights), x) + model.bias);
}

double forward(const RelevanceModel& model, std::span<const double> x) {
  if (x.size() != model.dim()) {
    throw std::invalid_argument("feature dim " + std::to_string(x.size()) + " != model dim " +
                                std::to_string(model.dim()));
  }
  return sigmoid(dot(std::span<const double>(model.weights), x) + model.bias);
}

double loss_bce(double y_pos, double y_neg, bool* clamped) {
  const double p = std::clamp(y_pos, kProbClamp, 1.0 - kProbClamp);
  const double n = std::clamp(y_neg, kProbClamp, 1.0 - kProbClamp);
  if (clamped) *clamped = p != y_pos || n != y_neg;
  return -std::log(p) - std::log(1.0 - n);
}

double loss_triplet_mod(double y_pos, double y_neg, double margin, TripletOrientation orientation) {
  if (!(margin > 0.0)) throw std::invalid_argument("triplet margin must be > 0");
  const double gap = orientation == TripletOrientation::published ? y_pos - y_neg : y_neg - y_pos;
  const double ft = std::max(gap + margin, 0.0);
  const double arg = 1.0 + margin - ft;
  if (!(arg > 0.0)) throw std::domain_error("triplet loss argument is not positive");
  return -std::log(arg);
}

double penalty(std::span<const double> weights, Regularizer kind, double lambda) {
  double s = 0.0;
  switch (kind) {
    case Regularizer::none: return 0.0;
    case Regularizer::l1:
      for (double w : weights) s += std::abs(w);
      break;
    case Regularizer::l2:
      for (double w : weights) s += w * w;
      break;
  }
  return lambda * s;
}

Objective Objective::from(const TrainConfig& config, std::size_t dim) {
  return Objective{config.loss, config.regularizer, config.lambda, config.margin,
                   config.triplet_orientation, dim};
}

std::size_t Objective::parameter_count() const {
  return loss == LossKind::bce_softmax2 ? 2 * dim + 2 : dim + 1;
}

double Objective::evaluate(std::span<const double> params, std::span<const TrainingPair* const> batch,
                           std::span<double> grad) const {
  const std::size_t P = parameter_count();
  if (params.size() != P) throw std::invalid_argument("parameter vector has the wrong length");
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const bool want_grad = !grad.empty();
  if (want_grad) {
    if (grad.size() != P) throw std::invalid_argument("gradient vector has the wrong length");
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;

  for (const TrainingPair* pair : batch) {
    const std::span<const float> xp(pair->positive), xn(pair->negative);
    if (xp.size() != dim || xn.size() != dim) throw std::invalid_argument("training pair dim mismatch");

    switch (loss) {
      case LossKind::bce_sigmoid: {
        const auto w = params.first(dim);
        const double b = params[dim];
        const double zp = dot(w, xp) + b, zn = dot(w, xn) + b;
        // -ln sigmoid(zp) - ln(1 - sigmoid(zn))
        total += softplus(-zp) + softplus(zn);
        if (want_grad) {
          const double gp = (sigmoid(zp) - 1.0) * inv_n, gn = sigmoid(zn) * inv_n;
          for (std::size_t i = 0; i < dim; ++i) grad[i] += gp * xp[i] + gn * xn[i];
          grad[dim] += gp + gn;
        }
        break;
      }
      case LossKind::bce_softmax2: {
        const auto w_rel = params.subspan(0, dim), w_irr = params.subspan(dim, dim);
        const double b_rel = params[2 * dim], b_irr = params[2 * dim + 1];
        // Relevance probability is softmax over (irr, rel) logits = sigmoid(rel - irr).
        const double dp = (dot(w_rel, xp) + b_rel) - (dot(w_irr, xp) + b_irr);
        const double dn = (dot(w_rel, xn) + b_rel) - (dot(w_irr, xn) + b_irr);
        total += softplus(-dp) + softplus(dn);
        if (want_grad) {
          const double gp = (sigmoid(dp) - 1.0) * inv_n, gn = sigmoid(dn) * inv_n;
          for (std::size_t i = 0; i < dim; ++i) {
            const double g = gp * xp[i] + gn * xn[i];
            grad[i] += g;
            grad[dim + i] -= g;
          }
          grad[2 * dim] += gp + gn;
          grad[2 * dim + 1] -= gp + gn;
        }
        break;
      }
      case LossKind::triplet_mod: {
        const auto w = params.first(dim);
        const double b = params[dim];
        const double yp = sigmoid(dot(w, xp) + b), yn = sigmoid(dot(w, xn) + b);
        const double sgn = orientation == TripletOrientation::published ? 1.0 : -1.0;
        const double raw = sgn * (yp - yn) + margin;
        const double ft = std::max(raw, 0.0);
        total += -std::log(1.0 + margin - ft);
        if (want_grad && raw > 0.0) {
          const double dl_dft = 1.0 / (1.0 + margin - ft);
          const double gp = dl_dft * sgn * yp * (1.0 - yp) * inv_n;
          const double gn = -dl_dft * sgn * yn * (1.0 - yn) * inv_n;
          for (std::size_t i = 0; i < dim; ++i) grad[i] += gp * xp[i] + gn * xn[i];
          grad[dim] += gp + gn;
        }
        break;
      }
    }
  }
  total *= inv_n;

  const std::size_t n_weights = loss == LossKind::bce_softmax2 ? 2 * dim : dim;
  const auto weights = params.first(n_weights);
  total += penalty(weights, regularizer, lambda);
  if (want_grad && regularizer != Regularizer::none) {
    for (std::size_t i = 0; i < n_weights; ++i) {
      grad[i] += regularizer == Regularizer::l1 ? lambda * sign(weights[i]) : 2.0 * lambda * weights[i];
    }
  }
  return total;
}

RelevanceModel Objective::to_model(std::span<const double> params, const TrainConfig& config) const {
  RelevanceModel model;
  model.config = config;
  model.weights.resize(dim);
  if (loss == LossKind::bce_softmax2) {
    for (std::size_t i = 0; i < dim; ++i) model.weights[i] = params[i] - params[dim + i];
    model.bias = params[2 * dim] - params[2 * dim + 1];
  } else {
    std::copy_n(params.begin(), dim, model.weights.begin());
    model.bias = params[dim];
  }
  return model;
}

RelevanceModel train(std::span<const TrainingPair> pairs, const TrainConfig& config, TrainStats* stats) {
  config.validate();
  if (pairs.empty()) throw std::invalid_argument("no training pairs");
  const std::size_t dim = pairs.front().positive.size();
  for (const auto& p : pairs) {
    if (p.positive.size() != dim || p.negative.size() != dim) {
      throw std::invalid_argument("training pair " + p.context_id + " has inconsistent dims");
    }
  }

  const Objective objective = Objective::from(config, dim);
  const std::size_t P = objective.parameter_count();
  std::vector<double> params(P, 0.0), grad(P), m(P, 0.0), v(P, 0.0);
  double beta1_t = 1.0, beta2_t = 1.0;
  std::size_t step = 0;
  double last_loss = 0.0;

  Engine engine(derive_seed(config.seed, "idkcore.train"));
  std::vector<const TrainingPair*> batch;
  batch.reserve(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = random_permutation(pairs.size(), engine);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      for (std::size_t k = start; k < std::min(start + config.batch_size, order.size()); ++k) {
        batch.push_back(&pairs[order[k]]);
      }
      last_loss = objective.evaluate(params, batch, grad);
      if (!std::isfinite(last_loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", step " << step << " (first context "
            << batch.front()->context_id << ")";
        throw std::runtime_error(msg.str());
      }
      ++step;
      beta1_t *= config.adam_beta1;
      beta2_t *= config.adam_beta2;
      for (std::size_t i = 0; i < P; ++i) {
        m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * grad[i];
        v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / (1.0 - beta1_t);
        const double v_hat = v[i] / (1.0 - beta2_t);
        params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
      }
    }
  }
  if (stats) {
    stats->steps = step;
    stats->final_batch_loss = last_loss;
  }
  return objective.to_model(params, config);
}

std::vector<TrainingPair> make_training_pairs(const Corpus& corpus, const FeatureStore& store,
                                              const TrainConfig& config) {
  config.validate();
  const auto gold = gold_responses(corpus);
  std::vector<TrainingPair> pairs;
  std::vector<std::string> missing;

  for (const auto& cid : corpus.context_order()) {
    const EvalExample* g = gold.at(cid);
    if (g->split != Split::train) continue;
    const auto* pos = store.find(g->id, config.feature_kind);
    if (!pos) {
      missing.push_back(g->id);
      continue;
    }
    auto add = [&](const std::string& key) {
      const auto* neg = store.find(key, FeatureKind::PAIR_NSP_NEG);
      if (!neg) {
        missing.push_back(key);
        return;
      }
      pairs.push_back({cid, pos->values, neg->values});
    };
    if (config.negatives == NegativeScheme::shuffled) {
      add(shuffled_key(cid));
    } else {
      for (const auto& text : config.negative_texts) add(negative_key(cid, text));
    }
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " training features missing:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    throw DataError(msg);
  }
  if (pairs.empty()) throw DataError("corpus has no training contexts");
  return pairs;
}

ScoreSet score(const RelevanceModel& model, const Corpus& corpus, const FeatureStore& store, bool strict) {
  const auto joined = join(corpus, store, model.config.feature_kind, strict);
  ScoreSet out;
  out.missing = joined.missing;
  out.scores.reserve(joined.pairs.size());
  for (const auto& [ex, rec] : joined.pairs) {
    out.scores.push_back({ex->id, "IDK", forward(model, std::span<const float>(rec->values))});
  }
  return out;
}

std::vector<double> rescale(std::span<const double> scores, double lo, double hi) {
  if (scores.empty()) throw std::invalid_argument("rescale of an empty score list");
  const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
  if (!(*mx > *mn)) throw std::invalid_argument("rescale of constant scores (degenerate range)");
  std::vector<double> out;
  out.reserve(scores.size());
  const double span = *mx - *mn;
  for (double s : scores) out.push_back(lo + (s - *mn) / span * (hi - lo));
  return out;
}

WeightHistogram weight_histogram(const RelevanceModel& model, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  WeightHistogram h;
  h.counts.assign(bins, 0);
  std::vector<double> logs;
  for (double w : model.weights) {
    if (w == 0.0) {
      ++h.zero_count;
    } else {
      logs.push_back(std::log10(std::abs(w)));
    }
  }
  if (logs.empty()) return h;
  const auto [mn, mx] = std::minmax_element(logs.begin(), logs.end());
  h.log10_min = *mn;
  h.log10_max = *mx;
  const double width = (*mx - *mn) / static_cast<double>(bins);
  for (double l : logs) {
    std::size_t b = width > 0 ? static_cast<std::size_t>((l - *mn) / width) : 0;
    h.counts[std::min(b, bins - 1)]++;
  }
  return h;
}

void write_model(const RelevanceModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << json{{"D", model.dim()},
              {"weights", model.weights},
              {"bias", model.bias},
              {"config", config_to_json(model.config)},
              {"fingerprint", fnv1a64(model.config.fingerprint())},
              {"seed", model.config.seed}}
             .dump()
      << '\n';
}

RelevanceModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model " + path.string());
  try {
    const auto j = json::parse(in);
    RelevanceModel model;
    model.weights = j.at("weights").get<std::vector<double>>();
    model.bias = j.at("bias").get<double>();
    model.config = config_from_json(j.at("config"));
    if (model.weights.size() != j.at("D").get<std::size_t>()) throw DataError("weights length != D");
    for (double w : model.weights) {
      if (!std::isfinite(w)) throw DataError("non-finite weight");
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace dialrel
