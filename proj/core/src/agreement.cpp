#include "toxpair/agreement.hpp"

#include <map>

namespace toxpair::eval {

double percent_agreement(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.size() != b.size()) throw LengthMismatch("label vectors differ in length");
    if (a.empty()) throw LengthMismatch("label vectors are empty");
    std::size_t equal = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == b[i]) ++equal;
    }
    return static_cast<double>(equal) / static_cast<double>(a.size());
}

double majority_agreement(const std::vector<std::vector<std::string>>& items_by_rater,
                          std::span<const std::string> reference) {
    if (items_by_rater.size() != reference.size()) {
        throw LengthMismatch("matrix rows and reference differ in length");
    }
    if (items_by_rater.empty()) throw LengthMismatch("empty matrix");

    std::size_t matches = 0;
    for (std::size_t i = 0; i < items_by_rater.size(); ++i) {
        const auto& raters = items_by_rater[i];
        if (raters.empty()) throw RaggedMatrix("item with zero raters");
        std::map<std::string, std::size_t> votes;
        for (const auto& label : raters) ++votes[label];

        std::size_t best = 0;
        bool tie = false;
        std::string winner;
        for (const auto& [label, count] : votes) {
            if (count > best) {
                best = count;
                winner = label;
                tie = false;
            } else if (count == best) {
                tie = true;
            }
        }
        if (!tie && winner == reference[i]) ++matches;
    }
    return static_cast<double>(matches) / static_cast<double>(items_by_rater.size());
}

double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.size() != b.size()) throw LengthMismatch("label vectors differ in length");
    if (a.empty()) throw LengthMismatch("label vectors are empty");

    double n = static_cast<double>(a.size());
    std::map<std::string, double> marg_a, marg_b;
    double observed = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        marg_a[a[i]] += 1.0;
        marg_b[b[i]] += 1.0;
        if (a[i] == b[i]) observed += 1.0;
    }
    double p_o = observed / n;
    double p_e = 0.0;
    for (const auto& [label, count_a] : marg_a) {
        auto it = marg_b.find(label);
        if (it != marg_b.end()) p_e += (count_a / n) * (it->second / n);
    }
    if (p_e >= 1.0) return 1.0;  // both raters constant on the same label
    return (p_o - p_e) / (1.0 - p_e);
}

double fleiss_kappa(const std::vector<std::vector<std::string>>& items_by_rater) {
    if (items_by_rater.empty()) throw RaggedMatrix("empty matrix");
    std::size_t raters = items_by_rater.front().size();
    if (raters < 2) throw RaggedMatrix("fleiss kappa needs at least 2 raters");
    for (const auto& row : items_by_rater) {
        if (row.size() != raters) throw RaggedMatrix("rows have differing rater counts");
    }

    double n_items = static_cast<double>(items_by_rater.size());
    double r = static_cast<double>(raters);

    std::map<std::string, double> category_totals;
    double p_bar = 0.0;
    for (const auto& row : items_by_rater) {
        std::map<std::string, double> counts;
        for (const auto& label : row) {
            counts[label] += 1.0;
            category_totals[label] += 1.0;
        }
        double sum_sq = 0.0;
        for (const auto& [label, c] : counts) sum_sq += c * c;
        p_bar += (sum_sq - r) / (r * (r - 1.0));
    }
    p_bar /= n_items;

    double p_e = 0.0;
    for (const auto& [label, total] : category_totals) {
        double p_j = total / (n_items * r);
        p_e += p_j * p_j;
    }
    if (p_e >= 1.0) return 1.0;
    return (p_bar - p_e) / (1.0 - p_e);
}

}  // namespace toxpair::eval
