#include "riskmap/posterior_merge.hpp"

#include <algorithm>
#include <cmath>

#include "riskmap/errors.hpp"

namespace riskmap {

namespace {

// Append `src` scaled by `scale` to the mixture under assembly. scale == 1
// keeps the component values bit-identical to the source marginal.
void append_scaled(GaussianMixture& dst, const GaussianMixture& src, double scale) {
  for (int k = 0; k < src.components(); ++k) {
    dst.w.push_back(scale == 1.0 ? src.w[k] : scale * src.w[k]);
    dst.mu.push_back(src.mu[k]);
    dst.sigma.push_back(src.sigma[k]);
  }
}

}  // namespace

MergedPosterior merge_posteriors(const FitBundle& bundle) {
  const int n = bundle.n_areas;
  const int D = static_cast<int>(bundle.submodels.size());

  // Which submodels cover each area, with the local index inside each.
  std::vector<std::vector<std::pair<int, int>>> hits(n);  // (submodel, local)
  for (int d = 0; d < D; ++d) {
    const auto& members = bundle.submodels[d].members;
    for (int i = 0; i < static_cast<int>(members.size()); ++i)
      hits[members[i]].emplace_back(d, i);
  }

  const bool disjoint = bundle.partition.mode == DomainPartition::Mode::disjoint;
  MergedPosterior out;
  out.marginals.resize(n);
  out.summaries.resize(n);
  out.covers.resize(n);

  for (int i = 0; i < n; ++i) {
    const auto& h = hits[i];
    if (h.empty()) throw FitError("area " + std::to_string(i) + " is not covered by any submodel");
    if (disjoint && h.size() != 1)
      throw FitError("disjoint merge found area " + std::to_string(i) + " in several submodels");

    if (h.size() == 1) {
      const auto [d, local] = h.front();
      out.marginals[i] = bundle.submodels[d].fit.area_marginal(local);
      out.covers[i].emplace_back(d, 1.0);
    } else {
      double total = 0.0;
      std::vector<double> w(h.size());
      for (std::size_t j = 0; j < h.size(); ++j) {
        w[j] = bundle.submodels[h[j].first].fit.cpo_at(h[j].second);
        total += w[j];
      }
      if (!(total > 1e-290)) {
        // All predictive ordinates collapsed; fall back to an even mix.
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(h.size()));
        ++out.uniform_weight_areas;
      } else {
        for (double& v : w) v /= total;
      }
      GaussianMixture mix;
      for (std::size_t j = 0; j < h.size(); ++j) {
        append_scaled(mix, bundle.submodels[h[j].first].fit.area_marginal(h[j].second), w[j]);
        out.covers[i].emplace_back(h[j].first, w[j]);
      }
      out.marginals[i] = std::move(mix);
    }
    out.summaries[i] = summarize_risk(out.marginals[i]);
  }
  return out;
}

AlphaEstimate estimate_alpha(const FitBundle& bundle, const MergedPosterior& merged) {
  const int n = bundle.n_areas;
  const int D = static_cast<int>(bundle.submodels.size());
  const int S = bundle.plan.samples;

  // Joint latent draws per submodel; row layout (xi..., alpha).
  std::vector<Eigen::MatrixXd> draws(D);
  for (int d = 0; d < D; ++d) {
    Rng rng(submodel_seed(bundle.plan, d));
    draws[d] = bundle.submodels[d].fit.sample_joint(S, rng);
  }
  // Local index of each area inside each covering submodel.
  std::vector<std::vector<int>> local_of(D);
  for (int d = 0; d < D; ++d) {
    local_of[d].assign(n, -1);
    const auto& members = bundle.submodels[d].members;
    for (int i = 0; i < static_cast<int>(members.size()); ++i) local_of[d][members[i]] = i;
  }

  Rng select(derive_seed(bundle.plan.seed, static_cast<std::uint64_t>(D)));
  AlphaEstimate out;
  out.samples.resize(S);
  for (int s = 0; s < S; ++s) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto& cov = merged.covers[i];
      int d;
      if (cov.size() == 1) {
        d = cov.front().first;
      } else {
        const double u = select.uniform();
        double run = 0.0;
        d = cov.back().first;
        for (const auto& [dj, wj] : cov) {
          run += wj;
          if (u < run) {
            d = dj;
            break;
          }
        }
      }
      const int local = local_of[d][i];
      const int alpha_row = static_cast<int>(draws[d].rows()) - 1;
      acc += draws[d](local, s) + draws[d](alpha_row, s);
    }
    out.samples[s] = acc / static_cast<double>(n);
  }

  double mean = 0.0;
  for (double v : out.samples) mean += v;
  mean /= S;
  double ss = 0.0;
  for (double v : out.samples) ss += (v - mean) * (v - mean);
  out.mean = mean;
  out.sd = std::sqrt(ss / std::max(1, S - 1));
  std::vector<double> sorted = out.samples;
  std::sort(sorted.begin(), sorted.end());
  const auto quant = [&](double p) {
    const double h = p * (S - 1);
    const int lo = static_cast<int>(std::floor(h));
    const int hi = std::min(lo + 1, S - 1);
    return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
  };
  out.median = quant(0.5);
  out.q025 = quant(0.025);
  out.q975 = quant(0.975);

  KdeResult kde = kde_density(out.samples);
  out.bandwidth = kde.bandwidth;
  out.grid = std::move(kde.grid);
  out.density = std::move(kde.density);
  return out;
}

}  // namespace riskmap
