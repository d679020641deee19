#include "bwc/network.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "bwc/errors.hpp"

namespace bwc {

LabeledTensor trace_repeated(const LabeledTensor& a) {
  std::map<int, std::vector<std::size_t>> where;
  for (std::size_t i = 0; i < a.labels.size(); ++i) where[a.labels[i]].push_back(i);
  bool any = false;
  for (auto& [l, pos] : where) {
    if (pos.size() > 2) throw ArgumentError("label appears more than twice on one tensor");
    any = any || pos.size() == 2;
  }
  if (!any) return a;
  // Move traced pairs to the back, then sum the diagonal.
  std::vector<std::size_t> keep, traced;
  std::vector<int> out_labels;
  Shape out_shape;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const auto& pos = where[a.labels[i]];
    if (pos.size() == 1) {
      keep.push_back(i);
      out_labels.push_back(a.labels[i]);
      out_shape.push_back(a.t.extent(i));
    } else if (pos[0] == i) {
      if (a.t.extent(pos[0]) != a.t.extent(pos[1])) throw DimensionError("traced extents differ");
      traced.push_back(pos[0]);
      traced.push_back(pos[1]);
    }
  }
  std::vector<std::size_t> perm = keep;
  perm.insert(perm.end(), traced.begin(), traced.end());
  DenseTensor p = a.t.permuted(perm);
  std::size_t outer = shape_product(out_shape);
  std::vector<std::size_t> dims;
  for (std::size_t k = 0; k < traced.size(); k += 2) dims.push_back(a.t.extent(traced[k]));
  std::size_t inner = 1;
  for (auto d : dims) inner *= d * d;
  DenseTensor out(out_shape);
  // Enumerate diagonal offsets of the traced block.
  std::vector<std::size_t> diag;
  {
    std::vector<std::size_t> idx(dims.size(), 0);
    std::size_t count = 1;
    for (auto d : dims) count *= d;
    for (std::size_t c = 0; c < count; ++c) {
      std::size_t off = 0;
      for (std::size_t k = 0; k < dims.size(); ++k) off = (off * dims[k] + idx[k]) * dims[k] + idx[k];
      diag.push_back(off);
      for (std::size_t k = dims.size(); k-- > 0;) {
        if (++idx[k] < dims[k]) break;
        idx[k] = 0;
      }
    }
  }
  for (std::size_t o = 0; o < outer; ++o) {
    cplx s = 0.0;
    for (auto off : diag) s += p[o * inner + off];
    out[o] = s;
  }
  return {out, out_labels};
}

LabeledTensor contract_labeled(const LabeledTensor& a0, const LabeledTensor& b0) {
  LabeledTensor a = trace_repeated(a0), b = trace_repeated(b0);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<int> labels;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    auto it = std::find(b.labels.begin(), b.labels.end(), a.labels[i]);
    if (it != b.labels.end())
      pairs.emplace_back(i, static_cast<std::size_t>(it - b.labels.begin()));
    else
      labels.push_back(a.labels[i]);
  }
  for (std::size_t j = 0; j < b.labels.size(); ++j)
    if (std::find(a.labels.begin(), a.labels.end(), b.labels[j]) == a.labels.end())
      labels.push_back(b.labels[j]);
  return {contract(a.t, b.t, pairs), labels};
}

namespace {

double result_size(const LabeledTensor& a, const LabeledTensor& b, bool& shares) {
  double s = 1.0;
  shares = false;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    if (std::find(b.labels.begin(), b.labels.end(), a.labels[i]) == b.labels.end())
      s *= static_cast<double>(a.t.extent(i));
    else
      shares = true;
  }
  for (std::size_t j = 0; j < b.labels.size(); ++j)
    if (std::find(a.labels.begin(), a.labels.end(), b.labels[j]) == a.labels.end())
      s *= static_cast<double>(b.t.extent(j));
  return s;
}

}  // namespace

LabeledTensor contract_network(std::vector<LabeledTensor> parts) {
  if (parts.empty()) return {DenseTensor::scalar(1.0), {}};
  for (auto& p : parts) p = trace_repeated(p);
  while (parts.size() > 1) {
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    bool best_shares = false;
    for (std::size_t i = 0; i < parts.size(); ++i)
      for (std::size_t j = i + 1; j < parts.size(); ++j) {
        bool shares = false;
        double s = result_size(parts[i], parts[j], shares);
        // Prefer pairs that share a label; outer products only as a last resort.
        if ((shares && !best_shares) || (shares == best_shares && s < best)) {
          best = s;
          best_shares = shares;
          bi = i;
          bj = j;
        }
      }
    LabeledTensor merged = contract_labeled(parts[bi], parts[bj]);
    parts.erase(parts.begin() + static_cast<std::ptrdiff_t>(bj));
    parts[bi] = std::move(merged);
  }
  return parts[0];
}

DenseTensor arrange(const LabeledTensor& a, const std::vector<int>& labels) {
  if (labels.size() != a.labels.size()) throw ArgumentError("label set mismatch");
  std::vector<std::size_t> perm;
  for (int l : labels) {
    auto it = std::find(a.labels.begin(), a.labels.end(), l);
    if (it == a.labels.end()) throw ArgumentError("label not present");
    perm.push_back(static_cast<std::size_t>(it - a.labels.begin()));
  }
  return a.t.permuted(perm);
}

}  // namespace bwc
