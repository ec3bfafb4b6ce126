#include "pollbias/parameters.hpp"

#include <cmath>
#include <stdexcept>

namespace pollbias {

std::string_view to_string(ModelVariant variant) {
  return variant == ModelVariant::Extended ? "extended" : "baseline";
}

ModelVariant parse_model_variant(std::string_view text) {
  if (text == "extended") return ModelVariant::Extended;
  if (text == "baseline") return ModelVariant::Baseline;
  throw std::invalid_argument("unknown model variant '" + std::string(text) +
                              "' (expected extended|baseline)");
}

namespace {

bool sampled_in(ModelVariant variant, std::string_view name) {
  if (variant == ModelVariant::Extended) return true;
  return name != "gamma" && name != "kappa" && name != "mu_kappa" && name != "sigma_kappa";
}

bool is_positive_field(std::string_view name) {
  return name == "tau1_sq" || name == "tau2_sq" || name.substr(0, 5) == "sigma";
}

}  // namespace

ParameterLayout::ParameterLayout(std::vector<std::string> race_labels,
                                 std::vector<std::string> group_labels,
                                 std::vector<std::string> house_labels,
                                 std::vector<std::string> year_labels,
                                 std::vector<std::size_t> race_year, ModelVariant variant)
    : race_labels_(std::move(race_labels)),
      group_labels_(std::move(group_labels)),
      house_labels_(std::move(house_labels)),
      year_labels_(std::move(year_labels)),
      race_year_(std::move(race_year)),
      variant_(variant) {
  if (race_year_.size() != race_labels_.size())
    throw std::invalid_argument("race_year must have one entry per race");
  for (std::size_t y : race_year_)
    if (y >= year_labels_.size()) throw std::invalid_argument("race_year index out of range");
  build();
}

ParameterLayout ParameterLayout::for_dataset(const PreparedDataset& data, ModelVariant variant) {
  std::vector<std::string> races, groups, years;
  for (const RaceResult& r : data.races) races.push_back(r.label());
  for (std::size_t g = 0; g < data.group_count(); ++g) groups.push_back(data.group_label(g));
  for (int y : data.years) years.push_back(std::to_string(y));
  return ParameterLayout(std::move(races), std::move(groups), data.houses, std::move(years),
                         data.race_year, variant);
}

ParameterLayout& ParameterLayout::operator=(const ParameterLayout& other) {
  if (this == &other) return *this;
  race_labels_ = other.race_labels_;
  group_labels_ = other.group_labels_;
  house_labels_ = other.house_labels_;
  year_labels_ = other.year_labels_;
  race_year_ = other.race_year_;
  variant_ = other.variant_;
  build();
  return *this;
}

void ParameterLayout::build() {
  blocks_.clear();
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t size, const std::vector<std::string>* labels) {
    if (!sampled_in(variant_, name)) return;
    const bool positive = is_positive_field(name);
    blocks_.push_back({std::move(name), offset, size, positive, labels});
    offset += size;
  };
  add("alpha1", races(), &race_labels_);
  add("beta1", races(), &race_labels_);
  add("tau1_sq", races(), &race_labels_);
  add("alpha2", races(), &race_labels_);
  add("beta2", races(), &race_labels_);
  add("tau2_sq", races(), &race_labels_);
  add("gamma", groups(), &group_labels_);
  add("kappa", houses(), &house_labels_);
  add("phi", years(), &year_labels_);
  for (const char* s : {"mu1_alpha", "sigma1_alpha", "mu1_beta", "sigma1_beta", "sigma1_tau",
                        "mu_kappa", "sigma_kappa", "sigma2_alpha", "mu2_beta", "sigma2_beta",
                        "sigma2_tau"})
    add(s, 1, nullptr);
  dimension_ = offset;
}

const ParameterLayout::Block& ParameterLayout::block(std::string_view name) const {
  for (const Block& b : blocks_)
    if (b.name == name) return b;
  throw std::out_of_range("layout has no block '" + std::string(name) + "'");
}

std::vector<std::string> ParameterLayout::names() const {
  std::vector<std::string> out;
  out.reserve(dimension_);
  for (const Block& b : blocks_) {
    if (!b.labels) {
      out.push_back(b.name);
      continue;
    }
    for (const std::string& label : *b.labels) out.push_back(b.name + "[" + label + "]");
  }
  return out;
}

ParameterSet ParameterLayout::zeros() const {
  ParameterSet p;
  p.alpha1.assign(races(), 0.0);
  p.beta1.assign(races(), 0.0);
  p.tau1_sq.assign(races(), 0.0);
  p.alpha2.assign(races(), 0.0);
  p.beta2.assign(races(), 0.0);
  p.tau2_sq.assign(races(), 0.0);
  p.gamma.assign(groups(), 0.0);
  p.kappa.assign(houses(), 0.0);
  p.phi.assign(years(), 0.0);
  return p;
}

void ParameterLayout::check_shape(const ParameterSet& p) const {
  auto expect = [](const std::vector<double>& v, std::size_t n, const char* name) {
    if (v.size() != n)
      throw std::invalid_argument(std::string("parameter '") + name + "' has " +
                                  std::to_string(v.size()) + " entries, expected " +
                                  std::to_string(n));
  };
  expect(p.alpha1, races(), "alpha1");
  expect(p.beta1, races(), "beta1");
  expect(p.tau1_sq, races(), "tau1_sq");
  expect(p.alpha2, races(), "alpha2");
  expect(p.beta2, races(), "beta2");
  expect(p.tau2_sq, races(), "tau2_sq");
  expect(p.gamma, groups(), "gamma");
  expect(p.kappa, houses(), "kappa");
  expect(p.phi, years(), "phi");
}

std::vector<double> ParameterLayout::to_flat(const ParameterSet& p) const {
  check_shape(p);
  std::vector<double> out(dimension_);
  for_each_field(p, [&](std::string_view name, std::span<const double> values) {
    if (!sampled_in(variant_, name)) return;
    const Block& b = block(name);
    std::copy(values.begin(), values.end(), out.begin() + static_cast<std::ptrdiff_t>(b.offset));
  });
  return out;
}

ParameterSet ParameterLayout::from_flat(std::span<const double> flat) const {
  if (flat.size() != dimension_) throw std::invalid_argument("flat vector has wrong dimension");
  ParameterSet p = zeros();
  for_each_field(p, [&](std::string_view name, std::span<double> values) {
    if (!sampled_in(variant_, name)) return;
    const Block& b = block(name);
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(b.offset), b.size, values.begin());
  });
  return p;
}

std::vector<double> ParameterLayout::to_unconstrained(const ParameterSet& p) const {
  std::vector<double> x = to_flat(p);
  for (const Block& b : blocks_) {
    if (!b.positive) continue;
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
      if (!(x[i] > 0.0))
        throw std::domain_error("parameter '" + b.name +
                                "' must be strictly positive to map to unconstrained space");
      x[i] = std::log(x[i]);
    }
  }
  return x;
}

ParameterSet ParameterLayout::from_unconstrained(std::span<const double> x) const {
  if (x.size() != dimension_) throw std::invalid_argument("unconstrained vector has wrong dimension");
  std::vector<double> flat(x.begin(), x.end());
  for (const Block& b : blocks_) {
    if (!b.positive) continue;
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) flat[i] = std::exp(flat[i]);
  }
  return from_flat(flat);
}

}  // namespace pollbias
