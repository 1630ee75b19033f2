#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qauction/core/measurement.hpp"
#include "qauction/core/operator.hpp"
#include "qauction/core/state.hpp"

namespace qauction::core {

/// One-parameter-per-generator family exp(sum_k theta_k G_k) of unitaries.
template <class Real = double>
struct BasicOperatorFamily {
  std::vector<BasicOperator<Real>> generators;  // each anti-hermitian

  BasicOperator<Real> at(const std::vector<Real>& params) const {
    if (params.size() != generators.size())
      throw std::invalid_argument("operator family expects " + std::to_string(generators.size()) + " parameters");
    if (generators.empty()) throw std::invalid_argument("operator family has no generators");
    ComplexMatrix<Real> g = ComplexMatrix<Real>::Zero(generators.front().dim(), generators.front().dim());
    for (std::size_t k = 0; k < generators.size(); ++k) g += params[k] * generators[k].to_dense();
    return exp_antihermitian(BasicOperator<Real>::dense(std::move(g)));
  }
};

/// Permissible operations of one player: named fixed unitaries and named families.
template <class Real = double>
struct BasicStrategySet {
  std::map<std::string, BasicOperator<Real>> fixed;
  std::map<std::string, BasicOperatorFamily<Real>> families;
};

struct StrategyChoice {
  std::string label;
  std::vector<double> params;  // empty for fixed operators
};

/// A finite quantum game: universum, pure initial state, per-player
/// permissible operations and a payoff table indexed by measured basis state.
template <class Real = double>
struct BasicGameDefinition {
  BasicStateVector<Real> initial;
  std::vector<BasicStrategySet<Real>> players;
  Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> payoff;  // dim x players

  Eigen::Index dim() const { return initial.dim(); }

  void validate() const {
    if (!initial.is_normalized(Real(kExternalNormTolerance)))
      throw std::invalid_argument("game: initial state is not normalized");
    if (payoff.rows() != dim() || payoff.cols() != static_cast<Eigen::Index>(players.size()))
      throw std::invalid_argument("game: payoff table must be dim x players");
    for (const auto& p : players) {
      for (const auto& [label, op] : p.fixed)
        if (!op.is_unitary() || op.dim() != dim())
          throw std::invalid_argument("game: operation '" + label + "' must be unitary with matching dim");
      for (const auto& [label, fam] : p.families)
        for (const auto& g : fam.generators)
          if (g.dim() != dim())
            throw std::invalid_argument("game: family '" + label + "' has mismatched dim");
    }
  }

  /// Resolves a player's choice against its permitted set.
  BasicOperator<Real> resolve(std::size_t player, const StrategyChoice& c) const {
    const auto& set = players.at(player);
    if (auto it = set.fixed.find(c.label); it != set.fixed.end()) {
      if (!c.params.empty()) throw std::invalid_argument("fixed operation '" + c.label + "' takes no parameters");
      return it->second;
    }
    if (auto it = set.families.find(c.label); it != set.families.end()) {
      std::vector<Real> params(c.params.begin(), c.params.end());
      return it->second.at(params);
    }
    throw std::invalid_argument("operation '" + c.label + "' is not permitted for player " + std::to_string(player));
  }
};

using OperatorFamily = BasicOperatorFamily<double>;
using StrategySet = BasicStrategySet<double>;
using GameDefinition = BasicGameDefinition<double>;

struct PlayResult {
  std::vector<double> payoffs;
  MeasurementRecord measurement;
};

/// State after every player's operations, applied in player order.
template <class Real>
BasicStateVector<Real> evolve_game(const BasicGameDefinition<Real>& game,
                                   const std::vector<std::vector<StrategyChoice>>& choices) {
  game.validate();
  if (choices.size() != game.players.size())
    throw std::invalid_argument("play_game: one choice list per player required");
  BasicStateVector<Real> psi = game.initial;
  for (std::size_t p = 0; p < choices.size(); ++p)
    for (const auto& c : choices[p]) psi = apply(game.resolve(p, c), psi);
  return psi;
}

/// rho -> (s_1, ..., s_n) -> measurement -> payoffs.
template <class Real>
PlayResult play_game(const BasicGameDefinition<Real>& game,
                     const std::vector<std::vector<StrategyChoice>>& choices, std::uint64_t seed) {
  const auto psi = evolve_game(game, choices);
  const auto sample = sample_measurement(psi, 1, seed);
  const auto& rec = sample.records.front();
  PlayResult out;
  out.measurement = rec;
  out.payoffs.reserve(game.players.size());
  for (Eigen::Index p = 0; p < game.payoff.cols(); ++p)
    out.payoffs.push_back(static_cast<double>(game.payoff(rec.outcome, p)));
  return out;
}

}  // namespace qauction::core
