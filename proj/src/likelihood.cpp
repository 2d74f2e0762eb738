#include "balar/likelihood.hpp"

#include <cmath>
#include <limits>

#include "balar/errors.hpp"

namespace balar {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

StateKernel::StateKernel(std::string question_id, std::string user_id, SpacePtr space, std::size_t num_choices,
                         std::vector<double> data)
    : question_id_(std::move(question_id)),
      user_id_(std::move(user_id)),
      space_(std::move(space)),
      num_choices_(num_choices),
      data_(std::move(data)) {
  if (!space_ || data_.size() != space_->total_states() * num_choices_) {
    throw MismatchError("kernel data does not match |states| x |choices|");
  }
}

std::vector<double> StateKernel::column(std::size_t choice) const {
  std::vector<double> out(num_states());
  for (std::size_t s = 0; s < out.size(); ++s) out[s] = at(s, choice);
  return out;
}

DimLikelihoodTable build_dim_table(std::string question_id, std::string user_id, std::string dim_id,
                                   const LabelGrid& labels, const LabelMap& map) {
  if (labels.empty()) throw ProtocolError("likelihood grid for '" + dim_id + "' has no rows");
  const std::size_t width = labels.front().size();
  if (width < 2) throw ProtocolError("likelihood grid for '" + dim_id + "' needs at least two choices");
  DimLikelihoodTable table{std::move(question_id), std::move(user_id), std::move(dim_id), {}};
  table.rows.reserve(labels.size());
  for (const auto& row : labels) {
    if (row.size() != width) {
      throw ProtocolError("ragged likelihood grid for '" + table.dim_id + "'");
    }
    table.rows.push_back(labels_to_distribution(row, map));
  }
  return table;
}

StateKernel build_question_kernel(std::span<const DimLikelihoodTable> tables, SpacePtr space) {
  if (!space) throw ConfigError("kernel needs a state space");
  const std::size_t p = space->dim_count();
  if (tables.empty()) throw MismatchError("no likelihood tables supplied");
  const std::string& qid = tables.front().question_id;
  const std::string& uid = tables.front().user_id;
  const std::size_t ny = tables.front().num_choices();

  // Table for each dimension, in dimension order.
  std::vector<const DimLikelihoodTable*> by_dim(p, nullptr);
  for (const auto& t : tables) {
    if (t.question_id != qid || t.user_id != uid) {
      throw MismatchError("likelihood tables mix question/user pairs");
    }
    if (t.num_choices() != ny) throw MismatchError("likelihood tables disagree on the choice count");
    const std::size_t j = space->dim_index(t.dim_id);
    if (by_dim[j] != nullptr) throw MismatchError("duplicate likelihood table for '" + t.dim_id + "'");
    if (t.rows.size() != space->dim(j).size()) {
      throw MismatchError("likelihood table for '" + t.dim_id + "' has wrong row count");
    }
    by_dim[j] = &t;
  }
  for (std::size_t j = 0; j < p; ++j) {
    if (by_dim[j] == nullptr) {
      throw MismatchError("missing likelihood table for (" + qid + ", " + uid + ", " + space->dim(j).id + ")");
    }
  }

  // Per-dimension log tables, so the state pass is a sum of lookups.
  std::vector<std::vector<double>> logs(p);
  for (std::size_t j = 0; j < p; ++j) {
    for (const auto& row : by_dim[j]->rows) {
      for (double v : row) logs[j].push_back(v > 0.0 ? std::log(v) : kNegInf);
    }
  }

  const std::size_t n = space->total_states();
  std::vector<double> data(n * ny);
  std::vector<double> row(ny);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t y = 0; y < ny; ++y) {
      double acc = 0.0;
      for (std::size_t j = 0; j < p; ++j) acc += logs[j][space->value_of(s, j) * ny + y];
      row[y] = acc;
    }
    const double z = log_sum_exp(row);
    if (z == kNegInf) {
      throw DegenerateObservation("likelihood product vanishes for every choice at state " + std::to_string(s) +
                                  " of (" + qid + ", " + uid + ")");
    }
    for (std::size_t y = 0; y < ny; ++y) data[s * ny + y] = std::exp(row[y] - z);
  }
  return StateKernel(qid, uid, std::move(space), ny, std::move(data));
}

AnswerKernel build_answer_kernel(std::vector<DimLikelihoodTable> tables, SpacePtr space) {
  auto combined = build_question_kernel(tables, std::move(space));
  return AnswerKernel{std::move(tables), std::move(combined)};
}

SoftObservation soft_observation(std::string question_id, std::span<const std::string> labels, const LabelMap& map) {
  return SoftObservation{std::move(question_id), labels_to_distribution(labels, map)};
}

std::vector<double> effective_likelihood(const StateKernel& k, const SoftObservation& w) {
  if (w.question_id != k.question_id()) {
    throw MismatchError("soft observation is for '" + w.question_id + "', kernel is for '" + k.question_id() + "'");
  }
  if (w.weights.size() != k.num_choices()) throw MismatchError("soft observation has wrong choice count");
  std::vector<double> out(k.num_states(), 0.0);
  for (std::size_t s = 0; s < out.size(); ++s) {
    const auto row = k.row(s);
    double acc = 0.0;
    for (std::size_t y = 0; y < row.size(); ++y) {
      if (w.weights[y] != 0.0) acc += w.weights[y] * row[y];
    }
    out[s] = acc;
  }
  return out;
}

Belief bayes_update(const Belief& b, std::span<const double> likelihood) {
  if (likelihood.size() != b.size()) throw MismatchError("likelihood vector has wrong length");
  const auto lp = b.logp();
  std::vector<double> post(lp.size());
  bool any = false;
  for (std::size_t s = 0; s < lp.size(); ++s) {
    const double l = likelihood[s];
    if (std::isnan(l) || l < 0.0) throw MismatchError("likelihood entries must be non-negative");
    post[s] = (l > 0.0 && lp[s] != kNegInf) ? lp[s] + std::log(l) : kNegInf;
    any = any || post[s] != kNegInf;
  }
  if (!any) throw DegenerateObservation("observation has zero evidence under the current belief");
  return Belief::from_log(b.space_ptr(), std::move(post));
}

std::vector<double> answer_probabilities(const Belief& b, const AnswerKernel& ak) {
  const auto& k = ak.combined;
  if (!b.space().same_shape(k.space())) throw MismatchError("answer kernel built over a different space");
  std::vector<double> out(k.num_choices(), 0.0);
  const auto lp = b.logp();
  for (std::size_t s = 0; s < lp.size(); ++s) {
    if (lp[s] == kNegInf) continue;
    const double w = std::exp(lp[s]);
    for (std::size_t a = 0; a < out.size(); ++a) out[a] += w * k.at(s, a);
  }
  return out;
}

}  // namespace balar
