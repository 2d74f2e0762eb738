#pragma once

#include <span>
#include <string>
#include <vector>

#include "balar/belief.hpp"
#include "balar/labels.hpp"

namespace balar {

using LabelGrid = std::vector<std::vector<std::string>>;

/// L(y | v_k) for one (question, user, dimension) triple: one row per value.
struct DimLikelihoodTable {
  std::string question_id;
  std::string user_id;
  std::string dim_id;
  std::vector<std::vector<double>> rows;

  std::size_t num_choices() const noexcept { return rows.empty() ? 0 : rows.front().size(); }
};

/// Dense |states| x |choices| row-stochastic matrix over a state space.
class StateKernel {
 public:
  StateKernel(std::string question_id, std::string user_id, SpacePtr space, std::size_t num_choices,
              std::vector<double> data);

  const std::string& question_id() const noexcept { return question_id_; }
  const std::string& user_id() const noexcept { return user_id_; }
  const StateSpace& space() const noexcept { return *space_; }
  const SpacePtr& space_ptr() const noexcept { return space_; }
  std::size_t num_states() const noexcept { return space_->total_states(); }
  std::size_t num_choices() const noexcept { return num_choices_; }

  double at(std::size_t state, std::size_t choice) const noexcept { return data_[state * num_choices_ + choice]; }
  std::span<const double> row(std::size_t state) const noexcept {
    return {data_.data() + state * num_choices_, num_choices_};
  }
  std::vector<double> column(std::size_t choice) const;

 private:
  std::string question_id_;
  std::string user_id_;
  SpacePtr space_;
  std::size_t num_choices_;
  std::vector<double> data_;
};

using QuestionKernel = StateKernel;

/// Soft evidence over a question's choices.
struct SoftObservation {
  std::string question_id;
  std::vector<double> weights;
};

/// Per-dimension answer tables P(a | theta_j) plus their combined state-level kernel.
struct AnswerKernel {
  std::vector<DimLikelihoodTable> tables;
  StateKernel combined;
};

/// Row k = normalize(phi(labels[k][.])). Throws ProtocolError for a ragged
/// grid, fewer than two columns, or an unknown label.
DimLikelihoodTable build_dim_table(std::string question_id, std::string user_id, std::string dim_id,
                                   const LabelGrid& labels, const LabelMap& map);

/// K(theta, y) proportional to prod_j L_j(y | theta_j), normalized per row in log space.
/// `tables` must hold exactly one table per dimension, in any order.
StateKernel build_question_kernel(std::span<const DimLikelihoodTable> tables, SpacePtr space);

AnswerKernel build_answer_kernel(std::vector<DimLikelihoodTable> tables, SpacePtr space);

SoftObservation soft_observation(std::string question_id, std::span<const std::string> labels, const LabelMap& map);

/// L_hat(theta) = sum_y w_y K(theta, y).
std::vector<double> effective_likelihood(const StateKernel& k, const SoftObservation& w);

/// Posterior proportional to L_hat * prior, computed in log space. States with
/// L_hat == 0 get -inf. Throws DegenerateObservation when the evidence mass is 0.
Belief bayes_update(const Belief& b, std::span<const double> likelihood);

/// p(a) = sum_theta pi(theta) P(a | theta).
std::vector<double> answer_probabilities(const Belief& b, const AnswerKernel& ak);

}  // namespace balar
