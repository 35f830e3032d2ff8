#pragma once

// Verification reports.
//   report.json: {"kind", "split", "config_hash", "grid_hash", "records": [...], ...}
//   summary.csv: eps,robust_fraction,misclassified_fraction,adversarial_fraction
// Witnesses are replayed through the network before they are written.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "nnv/dataset.hpp"
#include "nnv/errors.hpp"
#include "nnv/train.hpp"
#include "nnv/verify.hpp"

namespace nnv {

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string json_hash(const nlohmann::json& j) { return fnv1a_hex(j.dump()); }

inline nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline ClassLabel label_from_string(const std::string& s) {
  if (s == "safe") return ClassLabel::Safe;
  if (s == "unsafe") return ClassLabel::Unsafe;
  throw DataError("label must be safe or unsafe, got '" + s + "'");
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw DataError("split must be train or test, got '" + s + "'");
}

/// JSON number, with infinities spelled as strings.
inline nlohmann::json number_json(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

/// Throws when a witness does not land in `want` under forward().
inline void check_witness(const Network& net, const Vector& w, ClassLabel want, const std::string& what) {
  if (classify(net, w) != want) throw EncodingError(what + ": witness does not replay to class " + to_string(want));
}

inline nlohmann::json record_json(const Network& net, const QueryRecord& r) {
  nlohmann::json j{{"sample_id", r.sample_id},
                   {"eps", r.eps},
                   {"label", to_string(r.label)},
                   {"predicted", to_string(r.predicted)},
                   {"verdict", r.correct() ? to_string(r.verdict) : "misclassified"},
                   {"margin", number_json(r.margin)},
                   {"nodes", r.nodes},
                   {"wall_time", r.wall_time}};
  if (r.witness) {
    check_witness(net, *r.witness, r.predicted == ClassLabel::Safe ? ClassLabel::Unsafe : ClassLabel::Safe,
                  "sample " + std::to_string(r.sample_id));
    j["witness"] = vector_json(*r.witness);
  } else {
    j["witness"] = nullptr;
  }
  if (r.witness_truth) j["witness_truth"] = to_string(*r.witness_truth);
  if (r.unresolved) j["unresolved"] = true;
  return j;
}

inline void write_summary_csv(const std::vector<CampaignPoint>& curve, std::ostream& out) {
  out << "eps,robust_fraction,misclassified_fraction,adversarial_fraction\n";
  for (const auto& p : curve)
    out << format_double(p.eps) << ',' << format_double(p.robust_fraction) << ','
        << format_double(p.misclassified_fraction) << ',' << format_double(p.adversarial_fraction) << '\n';
}

inline nlohmann::json campaign_json(const Network& net, const Campaign& c) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : c.records) recs.push_back(record_json(net, r));
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : c.curve)
    curve.push_back({{"eps", p.eps},
                     {"robust_fraction", p.robust_fraction},
                     {"misclassified_fraction", p.misclassified_fraction},
                     {"adversarial_fraction", p.adversarial_fraction},
                     {"undetermined", p.undetermined},
                     {"unresolved", p.unresolved}});
  return {{"records", recs}, {"curve", curve}};
}

inline nlohmann::json adversarials_json(const Network& net, const MiningResult& m) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& a : m.examples) {
    check_witness(net, a.witness, a.predicted_label, "adversarial " + std::to_string(a.sample_id));
    out.push_back({{"sample_id", a.sample_id},
                   {"eps", a.eps},
                   {"x_ref", vector_json(a.x_ref)},
                   {"witness", vector_json(a.witness)},
                   {"true_label", to_string(a.true_label)},
                   {"predicted_label", to_string(a.predicted_label)}});
  }
  return out;
}

/// Adversarial examples read back from a find-adv report, as retraining samples.
inline std::vector<LabeledSample> read_adversarials(const nlohmann::json& report) {
  std::vector<LabeledSample> out;
  try {
    for (const auto& a : report.at("adversarials"))
      out.push_back(LabeledSample{vector_from_json(a.at("witness")), label_from_string(a.at("true_label"))});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed adversarial report: ") + e.what());
  }
  return out;
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(1) << '\n';
}

}  // namespace nnv
