#include "gacfas/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "gacfas/io.hpp"

namespace gacfas {

void DomainSpec::validate() const {
  if (!(noise_sigma >= 0.0)) throw ContractError("DomainSpec: noise_sigma must be >= 0");
  if (n_samples < 2) throw ContractError("DomainSpec: n_samples must be >= 2");
}

std::size_t SourceSet::smallest_domain() const {
  if (domains.empty()) return 0;
  std::size_t m = domains.front().data.size();
  for (const auto& d : domains) m = std::min(m, d.data.size());
  return m;
}

Batch SourceSet::merged() const {
  std::vector<Batch> parts;
  parts.reserve(domains.size());
  for (const auto& d : domains) parts.push_back(d.data);
  return concat(parts);
}

Batch gen_two_moons(std::size_t n, double sigma, Prng& prng) {
  if (n < 2) throw ContractError("gen_two_moons: n must be >= 2");
  if (!(sigma >= 0.0)) throw ContractError("gen_two_moons: sigma must be >= 0");
  const std::size_t n0 = (n + 1) / 2;
  Batch b;
  b.inputs = Matrix(n, 2);
  b.labels.resize(n);
  b.domain_ids.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::numbers::pi * prng.uniform();
    const bool upper = i < n0;
    double x = upper ? std::cos(t) : 1.0 - std::cos(t);
    double y = upper ? std::sin(t) : 0.5 - std::sin(t);
    if (sigma > 0.0) {
      x += sigma * prng.normal();
      y += sigma * prng.normal();
    }
    b.inputs(i, 0) = x;
    b.inputs(i, 1) = y;
    b.labels[i] = upper ? 0 : 1;
  }
  return b;
}

Batch shift_domain(const Batch& batch, const DomainSpec& spec, int domain_index) {
  if (batch.inputs.cols != 2) throw ContractError("shift_domain: inputs must be 2-D");
  const double c = std::cos(spec.rotation);
  const double s = std::sin(spec.rotation);
  Batch out = batch;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = batch.inputs(i, 0);
    const double y = batch.inputs(i, 1);
    out.inputs(i, 0) = c * x - s * y + spec.translation[0];
    out.inputs(i, 1) = s * x + c * y + spec.translation[1];
  }
  std::fill(out.domain_ids.begin(), out.domain_ids.end(), domain_index);
  return out;
}

namespace {

Domain realize(const DomainSpec& spec, std::uint64_t seed, int domain_index,
               std::size_t source_index) {
  spec.validate();
  Prng prng(seed);
  Batch raw = gen_two_moons(spec.n_samples, spec.noise_sigma, prng);
  return Domain{spec, shift_domain(raw, spec, domain_index), source_index};
}

}  // namespace

SourceSet build_source_set(const std::vector<DomainSpec>& specs) {
  if (specs.empty()) throw ContractError("build_source_set: need at least one domain");
  SourceSet set;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    set.domains.push_back(realize(specs[i], specs[i].seed, static_cast<int>(i), i));
  }
  return set;
}

LeaveOneOut leave_one_out(const std::vector<DomainSpec>& specs, std::size_t held) {
  if (specs.size() < 2) throw ContractError("leave_one_out: need at least two domains");
  if (held >= specs.size()) {
    throw ContractError("leave_one_out: held index " + std::to_string(held) +
                        " out of range for " + std::to_string(specs.size()) + " domains");
  }
  LeaveOneOut out;
  out.held = held;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (i == held) continue;
    const int id = static_cast<int>(out.train.domains.size());
    out.train.domains.push_back(realize(specs[i], specs[i].seed, id, i));
  }
  out.test_domain_id = static_cast<int>(out.train.k());
  out.test = realize(specs[held], specs[held].seed + kTestSeedOffset, out.test_domain_id, held).data;
  return out;
}

Batch sample_minibatch(const SourceSet& source, std::size_t per_domain, Prng& prng) {
  if (source.k() == 0) throw ContractError("sample_minibatch: empty source set");
  if (per_domain < 1) throw ContractError("sample_minibatch: per_domain must be >= 1");
  if (per_domain > source.smallest_domain()) {
    throw ContractError("sample_minibatch: per_domain " + std::to_string(per_domain) +
                        " exceeds smallest domain size " +
                        std::to_string(source.smallest_domain()));
  }
  std::vector<Batch> parts;
  parts.reserve(source.k());
  std::vector<std::size_t> idx;
  for (const auto& d : source.domains) {
    const std::size_t n = d.data.size();
    if (per_domain == n) {
      parts.push_back(d.data);
      continue;
    }
    // Partial Fisher-Yates: the first per_domain slots end up a uniform
    // sample without replacement.
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t j = 0; j < per_domain; ++j) {
      const std::size_t pick = j + static_cast<std::size_t>(prng.below(n - j));
      std::swap(idx[j], idx[pick]);
    }
    parts.push_back(d.data.select_rows(std::span(idx.data(), per_domain)));
  }
  return concat(parts);
}

void save_batch_csv(const Batch& batch, const std::filesystem::path& path) {
  if (batch.inputs.cols != 2) throw ContractError("save_batch_csv: inputs must be 2-D");
  std::string text = "x0,x1,label,domain_id\n";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    text += format_double(batch.inputs(i, 0)) + "," + format_double(batch.inputs(i, 1)) + "," +
            std::to_string(batch.labels[i]) + "," + std::to_string(batch.domain_ids[i]) + "\n";
  }
  write_file_atomic(path, text);
}

Batch load_batch_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "x0,x1,label,domain_id") {
    throw IoError(path.string() + ": missing header x0,x1,label,domain_id");
  }
  std::vector<double> xs;
  Batch b;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string f[4];
    for (auto& field : f) {
      if (!std::getline(row, field, ',')) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 4 columns");
      }
    }
    try {
      xs.push_back(std::stod(f[0]));
      xs.push_back(std::stod(f[1]));
      b.labels.push_back(std::stoi(f[2]));
      b.domain_ids.push_back(std::stoi(f[3]));
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
  }
  b.inputs = Matrix(b.labels.size(), 2);
  b.inputs.data = std::move(xs);
  return b;
}

}  // namespace gacfas
