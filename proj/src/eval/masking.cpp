#include "lasan/eval/masking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "lasan/kv.hpp"

namespace lasan::eval {

num::Tensor<float> mask_leads(const num::Tensor<float>& signal, const std::array<bool, data::kLeads>& mask) {
  if (signal.dim() != 2 || signal.size(0) != data::kLeads)
    throw DimensionError("evalmask", "mask_leads expects an [8, L] signal, got " + num::to_string(signal.shape()));
  auto out = signal.clone();
  const std::size_t len = signal.size(1);
  auto d = out.data();
  for (std::size_t l = 0; l < data::kLeads; ++l)
    if (mask[l]) std::fill_n(d.begin() + static_cast<std::ptrdiff_t>(l * len), len, 0.0f);
  return out;
}

num::Tensor<float> mask_leads(const num::Tensor<float>& signal, const std::vector<std::size_t>& group) {
  std::array<bool, data::kLeads> mask{};
  for (auto l : group) {
    if (l >= data::kLeads) throw ContractError("evalmask", "lead index " + std::to_string(l) + " out of range");
    mask[l] = true;
  }
  return mask_leads(signal, mask);
}

const std::vector<LeadGroup>& canonical_groups() {
  static const std::vector<LeadGroup> groups{
      {"right_precordial", {2, 3, 4}},
      {"lateral", {0, 6, 7}},
      {"precordial", {2, 3, 4, 5, 6, 7}},
      {"limb", {0, 1}},
  };
  return groups;
}

const MaskingRow& MaskingReport::at(const std::string& group, const std::string& cls) const {
  for (const auto& r : rows)
    if (r.group == group && r.cls == cls) return r;
  throw ContractError("evalmask", "no masking row for " + group + "/" + cls);
}

namespace {

MaskingRow make_row(const std::string& group, const std::string& cls, double base, double masked) {
  MaskingRow r{group, cls, base, masked, 0.0, 100.0 * (base - masked)};
  r.drop_pct = base == 0.0 ? 0.0 : 100.0 * (base - masked) / base;
  return r;
}

}  // namespace

MaskingReport masking_analysis(model::Classifier<float>& model, const train::TaskData& test,
                               const std::vector<LeadGroup>& groups) {
  MaskingReport rep;
  rep.classes = train::score_class_names(test.task);
  rep.baseline = train::score_task(test.task, train::predict(model, test), test.targets);
  for (const auto& g : groups) {
    train::LeadMask mask{};
    for (auto l : g.leads) {
      if (l >= data::kLeads) throw ContractError("evalmask", "lead index " + std::to_string(l) + " out of range");
      mask[l] = true;
    }
    const auto masked = train::score_task(test.task, train::predict(model, test, &mask), test.targets);
    rep.rows.push_back(make_row(g.name, "MACRO", rep.baseline.primary, masked.primary));
    for (std::size_t c = 0; c < rep.classes.size(); ++c)
      rep.rows.push_back(make_row(g.name, rep.classes[c], rep.baseline.per_class[c], masked.per_class[c]));
  }
  return rep;
}

std::string masking_csv(const MaskingReport& r) {
  std::string s = "group,class,baseline_auroc,masked_auroc,drop_pct,drop_points\n";
  for (const auto& row : r.rows)
    s += row.group + ',' + row.cls + ',' + format_double(row.baseline_auroc) + ',' + format_double(row.masked_auroc) +
         ',' + format_double(row.drop_pct) + ',' + format_double(row.drop_points) + '\n';
  return s;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

std::string masking_svg(const MaskingReport& r) {
  std::vector<std::string> groups;
  for (const auto& row : r.rows)
    if (std::find(groups.begin(), groups.end(), row.group) == groups.end()) groups.push_back(row.group);
  std::vector<std::string> series{"MACRO"};
  series.insert(series.end(), r.classes.begin(), r.classes.end());
  static const char* colors[] = {"#4c4c4c", "#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

  double lo = 0.0, hi = 1.0;
  for (const auto& row : r.rows) {
    lo = std::min(lo, row.drop_pct);
    hi = std::max(hi, row.drop_pct);
  }
  hi = std::ceil(hi);
  lo = std::floor(lo);
  const double width = 120.0 + 160.0 * static_cast<double>(groups.size());
  const double top = 40.0, plot_h = 260.0, left = 70.0;
  const double bar_w = 120.0 / static_cast<double>(series.size());
  auto y_of = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", width) +
                  "\" height=\"380\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<text x=\"" + fmt("%.1f", width / 2) + "\" y=\"20\" text-anchor=\"middle\">AUROC drop (%) by masked lead group</text>\n";
  s += "<line x1=\"" + fmt("%.1f", left) + "\" y1=\"" + fmt("%.1f", y_of(0.0)) + "\" x2=\"" + fmt("%.1f", width - 20) +
       "\" y2=\"" + fmt("%.1f", y_of(0.0)) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + fmt("%.1f", left) + "\" y1=\"" + fmt("%.1f", top) + "\" x2=\"" + fmt("%.1f", left) + "\" y2=\"" +
       fmt("%.1f", top + plot_h) + "\" stroke=\"black\"/>\n";
  const double step = std::max(1.0, std::ceil((hi - lo) / 8.0));
  for (double v = lo; v <= hi + 1e-9; v += step)
    s += "<text x=\"" + fmt("%.1f", left - 6) + "\" y=\"" + fmt("%.1f", y_of(v) + 4) + "\" text-anchor=\"end\">" +
         fmt("%.0f", v) + "</text>\n";
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const double x0 = left + 20.0 + 160.0 * static_cast<double>(gi);
    for (std::size_t si = 0; si < series.size(); ++si) {
      const auto& row = r.at(groups[gi], series[si]);
      const double y1 = y_of(std::max(row.drop_pct, 0.0));
      const double y2 = y_of(std::min(row.drop_pct, 0.0));
      s += "<rect x=\"" + fmt("%.1f", x0 + bar_w * static_cast<double>(si)) + "\" y=\"" + fmt("%.1f", y1) +
           "\" width=\"" + fmt("%.1f", bar_w - 2) + "\" height=\"" + fmt("%.1f", y2 - y1) + "\" fill=\"" +
           colors[si % 5] + "\"><title>" + groups[gi] + " " + series[si] + " " + fmt("%.2f", row.drop_pct) +
           "%</title></rect>\n";
    }
    s += "<text x=\"" + fmt("%.1f", x0 + 60) + "\" y=\"" + fmt("%.1f", top + plot_h + 18) +
         "\" text-anchor=\"middle\">" + groups[gi] + "</text>\n";
  }
  for (std::size_t si = 0; si < series.size(); ++si) {
    const double x = left + 110.0 * static_cast<double>(si);
    s += "<rect x=\"" + fmt("%.1f", x) + "\" y=\"350\" width=\"12\" height=\"12\" fill=\"" + colors[si % 5] +
         "\"/><text x=\"" + fmt("%.1f", x + 16) + "\" y=\"360\">" + series[si] + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace lasan::eval
