#include "monotta/tta.hpp"
#include "monotta/baselines.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace monotta {

void TTAConfig::validate() const {
  if (!(lambda_balance >= 0)) throw std::invalid_argument("TTAConfig: lambda must be >= 0");
  if (!(beta >= 0 && beta <= 1)) throw std::invalid_argument("TTAConfig: beta must be in [0, 1]");
  if (!(eta > 0 && eta < gamma && gamma < 1)) throw std::invalid_argument("TTAConfig: requires 0 < eta < gamma < 1");
  if (n_max < 1) throw std::invalid_argument("TTAConfig: n_max must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TTAConfig: batch_size must be >= 1");
  if (!(learning_rate > 0)) throw std::invalid_argument("TTAConfig: learning_rate must be > 0");
  if (!(momentum >= 0 && momentum < 1)) throw std::invalid_argument("TTAConfig: momentum must be in [0, 1)");
}

std::string sha256_hex(std::span<const unsigned char> bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

void write_metrics_jsonl(std::span<const BatchMetrics> log, std::ostream& out) {
  for (const auto& m : log) {
    nlohmann::json rec{{"policy", m.policy},
                       {"step", m.step},
                       {"alpha", optional_json(m.alpha)},
                       {"l_ao", m.loss.l_ao},
                       {"l_nreg", m.loss.l_nreg},
                       {"total", m.loss.total},
                       {"n_high", m.loss.n_high},
                       {"n_low", m.loss.n_low},
                       {"per_class_counts", m.loss.per_class_counts},
                       {"mean_score", optional_json(m.mean_score)},
                       {"negative_mean_score", optional_json(m.loss.negative_mean_score)},
                       {"detections", m.detections},
                       {"updated", m.updated}};
    out << rec.dump() << '\n';
  }
}

void write_alpha_csv(std::span<const BatchMetrics> log, std::ostream& out) {
  out << "step,alpha\n";
  char buf[64];
  for (const auto& m : log) {
    if (!m.alpha) continue;
    std::snprintf(buf, sizeof(buf), "%.9f", *m.alpha);
    out << m.step << ',' << buf << '\n';
  }
}

std::string_view policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kSourceOnly:
      return "source_only";
    case PolicyKind::kBnAdapt:
      return "bn_adapt";
    case PolicyKind::kEntropyMin:
      return "entropy_min";
    case PolicyKind::kMonoTta:
      return "monotta";
  }
  return "unknown";
}

std::optional<PolicyKind> parse_policy(std::string_view text) {
  for (auto kind : {PolicyKind::kSourceOnly, PolicyKind::kBnAdapt, PolicyKind::kEntropyMin, PolicyKind::kMonoTta}) {
    if (policy_name(kind) == text) return kind;
  }
  return std::nullopt;
}

}  // namespace monotta
