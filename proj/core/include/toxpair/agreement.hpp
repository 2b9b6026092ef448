#pragma once

#include <span>
#include <string>
#include <vector>

#include "toxpair/errors.hpp"

namespace toxpair::eval {

class LengthMismatch : public Error {
public:
    using Error::Error;
};

class RaggedMatrix : public Error {
public:
    using Error::Error;
};

// Fraction of positions where the two label vectors agree.
double percent_agreement(std::span<const std::string> a, std::span<const std::string> b);

// Per-item majority across raters compared against a reference label; a tied
// majority counts as disagreement.
double majority_agreement(const std::vector<std::vector<std::string>>& items_by_rater,
                          std::span<const std::string> reference);

// κ = (p_o − p_e) / (1 − p_e) with marginal-product chance agreement.
// Returns 1.0 in the degenerate p_e = p_o = 1 case.
double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b);

// Fleiss' kappa over an items × raters matrix of categorical labels; every
// item must have the same number of raters (≥ 2).
double fleiss_kappa(const std::vector<std::vector<std::string>>& items_by_rater);

}  // namespace toxpair::eval
