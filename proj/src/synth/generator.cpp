#include "lasan/synth/generator.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include "lasan/rng.hpp"

namespace lasan::synth {

namespace {

constexpr const char* kModule = "synthcorpus";
constexpr double kRate = data::kNativeRateHz;
constexpr double kDuration = static_cast<double>(data::kSamples) / kRate;

// Asymmetric Gaussian bump; times in seconds relative to the R peak.
struct Wave {
  double offset;
  double amp;
  double w_left;
  double w_right;
};

enum WaveIndex { kP, kQ, kR, kS, kT, kBaseWaves };

constexpr std::array<Wave, kBaseWaves> kBase{{
    {-0.160, 0.12, 0.022, 0.022},  // P
    {-0.028, -0.12, 0.008, 0.008},  // Q
    {0.000, 1.00, 0.010, 0.010},  // R
    {0.028, -0.28, 0.010, 0.010},  // S
    {0.270, 0.32, 0.045, 0.035},  // T (offset at 60 bpm)
}};

constexpr bool is_right_precordial(std::size_t lead) { return lead >= 2 && lead <= 4; }
constexpr bool is_lateral(std::size_t lead) { return lead == 0 || lead == 6 || lead == 7; }

// Everything that is fixed for a patient. Drawn in a label-independent order
// so that a label with zero pathology magnitude reproduces CONTROL exactly.
struct PatientDraw {
  double hr_bpm;
  std::array<double, data::kLeads> gains;
  std::array<double, kBaseWaves> amp_factor;
  std::array<double, kBaseWaves> width_factor;
  double qt_factor;
  double pr_factor;
  double severity;
  double subtype_u;
};

PatientDraw draw_patient(const SynthConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  PatientDraw d;
  d.hr_bpm = rng.uniform(cfg.hr_min_bpm, cfg.hr_max_bpm);
  for (auto& g : d.gains) g = rng.uniform(0.5, 1.5);
  for (std::size_t w = 0; w < kBaseWaves; ++w) {
    d.amp_factor[w] = 1.0 + (w == kT ? 0.15 : 0.10) * rng.normal();
    d.width_factor[w] = 1.0 + 0.08 * rng.normal();
  }
  d.qt_factor = 1.0 + 0.04 * rng.normal();
  d.pr_factor = 1.0 + 0.08 * rng.normal();
  d.severity = rng.uniform(cfg.severity_min, 1.0);
  d.subtype_u = rng.uniform();
  return d;
}

data::SubLabel subtype_of(data::Label label, const PatientDraw& d) {
  if (label != data::Label::Lqts) return data::SubLabel::None;
  return d.subtype_u < kLqt1Share ? data::SubLabel::Lqt1 : data::SubLabel::Lqt2;
}

// Wave list for one lead, including the class terms.
std::vector<Wave> lead_waves(const SynthConfig& cfg, data::Label label, data::SubLabel sub, const PatientDraw& d,
                             double rr, std::size_t lead) {
  const auto& m = cfg.magnitudes;
  const double sev = d.severity;
  std::vector<Wave> waves;
  for (std::size_t w = 0; w < kBaseWaves; ++w) {
    Wave v = kBase[w];
    v.amp *= d.amp_factor[w];
    v.w_left *= d.width_factor[w];
    v.w_right *= d.width_factor[w];
    if (w == kP) v.offset *= d.pr_factor;
    if (w == kT) v.offset *= std::sqrt(rr) * d.qt_factor;
    waves.push_back(v);
  }
  Wave& t = waves[kT];
  if (label == data::Label::Arvc && is_right_precordial(lead)) {
    if (m.arvc_notch > 0.0) waves.push_back({0.060, m.arvc_notch * sev, 0.008, 0.008});
    t.amp *= 1.0 - m.arvc_t_inversion * sev;
  }
  if (label == data::Label::Lqts) {
    t.offset += m.lqts_qt_delay * sev;
    if (is_lateral(lead)) {
      t.w_right *= 1.0 + m.lqts_t_lateral * sev;
      if (sub == data::SubLabel::Lqt1) {
        t.w_left *= 1.0 + m.lqt1_t_width * sev;
        t.w_right *= 1.0 + m.lqt1_t_width * sev;
      } else if (m.lqt2_t_notch > 0.0) {
        const Wave notch{t.offset + 0.2 * t.w_right, -m.lqt2_t_notch * sev * t.amp, 0.35 * t.w_left,
                         0.35 * t.w_left};
        waves.push_back(notch);
      }
    }
  }
  return waves;
}

void add_wave(std::vector<double>& lead, double r_time, const Wave& w, double gain) {
  if (w.amp == 0.0) return;
  const double c = r_time + w.offset;
  const auto first = static_cast<long>(std::ceil((c - 5.0 * w.w_left) * kRate));
  const auto last = static_cast<long>(std::floor((c + 5.0 * w.w_right) * kRate));
  const long n = static_cast<long>(lead.size());
  for (long i = std::max(0L, first); i <= std::min(n - 1, last); ++i) {
    const double t = static_cast<double>(i) / kRate;
    const double z = (t - c) / (t < c ? w.w_left : w.w_right);
    lead[static_cast<std::size_t>(i)] += gain * w.amp * std::exp(-0.5 * z * z);
  }
}

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(kModule, msg); };
  if (patients_per_class == 0 && cohort_scale <= 0.0) fail("patients_per_class must be positive");
  if (cohort_scale < 0.0) fail("cohort_scale must be nonnegative");
  if (ecgs_min == 0 || ecgs_min > ecgs_max) fail("ECG count range must satisfy 1 <= min <= max");
  if (!(hr_min_bpm > 0.0) || hr_min_bpm > hr_max_bpm) fail("heart-rate range must satisfy 0 < min <= max");
  if (!(noise_std >= 0.0)) fail("noise_std must be nonnegative");
  if (!(severity_min >= 0.0 && severity_min <= 1.0)) fail("severity_min must lie in [0, 1]");
  const auto& m = magnitudes;
  for (double v : {m.arvc_notch, m.arvc_t_inversion, m.lqts_qt_delay, m.lqts_t_lateral, m.lqt1_t_width,
                   m.lqt2_t_notch})
    if (!(v >= 0.0)) fail("pathology magnitudes must be nonnegative");
}

KvList SynthConfig::to_kv() const {
  const auto& m = magnitudes;
  return {
      {"synth.patients_per_class", std::to_string(patients_per_class)},
      {"synth.cohort_scale", format_double(cohort_scale)},
      {"synth.ecgs_min", std::to_string(ecgs_min)},
      {"synth.ecgs_max", std::to_string(ecgs_max)},
      {"synth.seed", std::to_string(seed)},
      {"synth.noise_std", format_double(noise_std)},
      {"synth.hr_min_bpm", format_double(hr_min_bpm)},
      {"synth.hr_max_bpm", format_double(hr_max_bpm)},
      {"synth.severity_min", format_double(severity_min)},
      {"synth.arvc_notch", format_double(m.arvc_notch)},
      {"synth.arvc_t_inversion", format_double(m.arvc_t_inversion)},
      {"synth.lqts_qt_delay", format_double(m.lqts_qt_delay)},
      {"synth.lqts_t_lateral", format_double(m.lqts_t_lateral)},
      {"synth.lqt1_t_width", format_double(m.lqt1_t_width)},
      {"synth.lqt2_t_notch", format_double(m.lqt2_t_notch)},
  };
}

bool SynthConfig::is_key(const std::string& key) { return key.starts_with("synth."); }

void SynthConfig::apply_kv(const KvList& kv) {
  auto& m = magnitudes;
  for (const auto& [k, v] : kv) {
    if (!is_key(k)) continue;
    const std::string f = k.substr(6);
    if (f == "patients_per_class") patients_per_class = kv_size(k, v);
    else if (f == "cohort_scale") cohort_scale = kv_double(k, v);
    else if (f == "ecgs_min") ecgs_min = kv_size(k, v);
    else if (f == "ecgs_max") ecgs_max = kv_size(k, v);
    else if (f == "seed") seed = kv_u64(k, v);
    else if (f == "noise_std") noise_std = kv_double(k, v);
    else if (f == "hr_min_bpm") hr_min_bpm = kv_double(k, v);
    else if (f == "hr_max_bpm") hr_max_bpm = kv_double(k, v);
    else if (f == "severity_min") severity_min = kv_double(k, v);
    else if (f == "arvc_notch") m.arvc_notch = kv_double(k, v);
    else if (f == "arvc_t_inversion") m.arvc_t_inversion = kv_double(k, v);
    else if (f == "lqts_qt_delay") m.lqts_qt_delay = kv_double(k, v);
    else if (f == "lqts_t_lateral") m.lqts_t_lateral = kv_double(k, v);
    else if (f == "lqt1_t_width") m.lqt1_t_width = kv_double(k, v);
    else if (f == "lqt2_t_notch") m.lqt2_t_notch = kv_double(k, v);
    else throw ConfigError("config", "unknown key '" + k + "'");
  }
}

std::size_t SynthConfig::patients_for(data::Label label) const {
  if (cohort_scale > 0.0) {
    const double n = static_cast<double>(kCohortCounts[static_cast<std::size_t>(label)]) * cohort_scale;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n)));
  }
  return patients_per_class;
}

std::uint64_t patient_seed(const SynthConfig& cfg, data::Label label, std::size_t patient_index) {
  return derive_seed({cfg.seed, static_cast<std::uint64_t>(label), patient_index});
}

std::string patient_id(data::Label label, std::size_t patient_index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "-%04zu", patient_index);
  return std::string(data::label_name(label)) + buf;
}

std::size_t ecg_count(const SynthConfig& cfg, std::uint64_t patient_seed) {
  Rng rng(derive_seed({patient_seed, 0xEC6C0u}));
  return cfg.ecgs_min + static_cast<std::size_t>(rng.below(cfg.ecgs_max - cfg.ecgs_min + 1));
}

num::Tensor<float> generate_raw(const SynthConfig& cfg, data::Label label, std::uint64_t pseed, std::size_t ecg_index,
                                data::SubLabel* sub_label) {
  cfg.validate();
  const PatientDraw d = draw_patient(cfg, pseed);
  const data::SubLabel sub = subtype_of(label, d);
  if (sub_label != nullptr) *sub_label = sub;

  Rng rng(derive_seed({pseed, ecg_index + 1}));
  const double hr = d.hr_bpm * (1.0 + 0.04 * rng.normal());
  const double rr = 60.0 / std::max(hr, 20.0);
  std::vector<double> r_times;
  for (double r = (rng.uniform() - 1.0) * rr; r < kDuration + 0.5; r += rr * (1.0 + 0.02 * rng.normal()))
    r_times.push_back(r);

  std::vector<float> out(data::kLeads * data::kSamples);
  std::vector<double> lead(data::kSamples);
  for (std::size_t l = 0; l < data::kLeads; ++l) {
    std::fill(lead.begin(), lead.end(), 0.0);
    const auto waves = lead_waves(cfg, label, sub, d, rr, l);
    for (double r : r_times)
      for (const auto& w : waves) add_wave(lead, r, w, d.gains[l]);
    for (std::size_t i = 0; i < data::kSamples; ++i) {
      const double noise = cfg.noise_std > 0.0 ? cfg.noise_std * rng.normal() : 0.0;
      out[l * data::kSamples + i] = static_cast<float>(lead[i] + noise);
    }
  }
  return num::Tensor<float>(num::Shape{data::kLeads, data::kSamples}, std::move(out));
}

data::EcgRecord generate_record(const SynthConfig& cfg, data::Label label, std::uint64_t pseed,
                                std::size_t ecg_index) {
  data::EcgRecord rec;
  rec.label = label;
  rec.signal = data::normalize_per_lead(generate_raw(cfg, label, pseed, ecg_index, &rec.sub_label), &rec.flat_leads);
  return rec;
}

std::vector<data::EcgRecord> generate_records(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<data::EcgRecord> out;
  for (std::size_t c = 0; c < data::kNumLabels; ++c) {
    const auto label = static_cast<data::Label>(c);
    for (std::size_t p = 0; p < cfg.patients_for(label); ++p) {
      const auto seed = patient_seed(cfg, label, p);
      const std::size_t n = ecg_count(cfg, seed);
      for (std::size_t k = 0; k < n; ++k) {
        auto rec = generate_record(cfg, label, seed, k);
        rec.patient_id = patient_id(label, p);
        out.push_back(std::move(rec));
      }
    }
  }
  return out;
}

std::vector<data::ManifestEntry> generate_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "records", ec);
  if (ec) throw IoError(kModule, "cannot create '" + (out_dir / "records").string() + "': " + ec.message());
  std::vector<data::ManifestEntry> manifest;
  std::map<std::string, std::size_t> per_patient;
  for (auto& rec : generate_records(cfg)) {
    const std::size_t k = per_patient[rec.patient_id]++;
    const std::string rel = "records/" + rec.patient_id + "_" + std::to_string(k) + ".lasn";
    data::write_record(out_dir / rel, rec);
    manifest.push_back({rec.patient_id, rec.label, rec.sub_label, rel});
  }
  data::write_manifest(out_dir / "manifest.tsv", manifest);
  return manifest;
}

}  // namespace lasan::synth
