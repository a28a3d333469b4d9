#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "lasan/dataio/formats.hpp"
#include "lasan/dataio/record.hpp"
#include "lasan/kv.hpp"

namespace lasan::synth {

// Magnitudes of the class-specific terms. Each is scaled by a per-patient
// severity drawn in [severity_min, 1].
struct PathologyMagnitudes {
  // ARVC, leads V1-V3: late-QRS notch amplitude (R = 1) and fraction of the
  // T amplitude removed (values above 1 invert the T wave).
  double arvc_notch = 0.12;
  // 2 inverts the T wave from severity 0.5 up. A merely flattened T would
  // look like a zero-masked lead and make masking V1-V3 mimic ARVC.
  double arvc_t_inversion = 2.0;
  // LQTS: T-peak delay in seconds on every lead.
  double lqts_qt_delay = 0.03;
  // LQTS, leads I, V5, V6: relative stretch of the descending T limb.
  double lqts_t_lateral = 1.2;
  // Lateral subtype terms: LQT1 widens the T wave, LQT2 notches it.
  double lqt1_t_width = 0.5;
  double lqt2_t_notch = 0.45;
};

struct SynthConfig {
  std::size_t patients_per_class = 100;
  // When positive, patient counts follow the ARVC:LQTS:CONTROL registry
  // proportions 121:268:256 multiplied by this factor instead.
  double cohort_scale = 0.0;
  std::size_t ecgs_min = 1;
  std::size_t ecgs_max = 3;
  std::uint64_t seed = 7;
  double noise_std = 0.05;
  double hr_min_bpm = 50.0;
  double hr_max_bpm = 95.0;
  double severity_min = 0.25;
  PathologyMagnitudes magnitudes;

  void validate() const;
  KvList to_kv() const;  // "synth.*" keys
  void apply_kv(const KvList& kv);  // ignores keys of other sections
  static bool is_key(const std::string& key);
  std::size_t patients_for(data::Label label) const;
};

inline constexpr std::array<std::size_t, 3> kCohortCounts{256, 121, 268};  // by label code
// LQT1:LQT2 share among LQTS patients.
inline constexpr double kLqt1Share = 194.0 / 268.0;

std::uint64_t patient_seed(const SynthConfig& cfg, data::Label label, std::size_t patient_index);
std::string patient_id(data::Label label, std::size_t patient_index);

// Raw (un-normalized) 8 x 2500 signal for one ECG of one patient.
num::Tensor<float> generate_raw(const SynthConfig& cfg, data::Label label, std::uint64_t patient_seed,
                                std::size_t ecg_index, data::SubLabel* sub_label = nullptr);

// One normalized record; the patient id is left for the caller to set.
data::EcgRecord generate_record(const SynthConfig& cfg, data::Label label, std::uint64_t patient_seed,
                                std::size_t ecg_index);

std::size_t ecg_count(const SynthConfig& cfg, std::uint64_t patient_seed);

// The whole corpus in manifest order (label code, patient index, ECG index).
std::vector<data::EcgRecord> generate_records(const SynthConfig& cfg);

// Writes records/<patient>_<k>.lasn and manifest.tsv under `out_dir`.
std::vector<data::ManifestEntry> generate_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace lasan::synth
