#pragma once

#include <string>
#include <vector>

#include "bwc/tensor.hpp"

namespace bwc {

class Mpo;

struct LocalTerm {
  std::vector<int> support;  // contiguous, increasing, 0-based
  DenseTensor op;            // 2^r x 2^r Hermitian matrix, first site most significant
  int first() const { return support.front(); }
  int body() const { return static_cast<int>(support.size()); }
};

struct HamiltonianSpec {
  int n_sites = 0;
  int local_dim = 2;
  std::vector<LocalTerm> terms;
  std::string label;
};

enum class Model { ClusterIsing, Pxp, Nnni };

struct ModelParams {
  double g = -0.75;  // cluster Ising
  double gx = 1.0;   // NNNI
  double gzz = 1.0;
  double gz1z = 1.0;
};

Model parse_model(const std::string& name);
std::string model_name(Model m);

namespace pauli {
DenseTensor I();
DenseTensor X();
DenseTensor Y();
DenseTensor Z();
DenseTensor P();  // projector onto spin down, (1 - Z)/2
DenseTensor Q();  // 1 - P
}  // namespace pauli

// Merges terms with identical support, drops all-zero terms and sorts by (body, first site).
HamiltonianSpec canonicalize(const HamiltonianSpec& spec);
void validate(const HamiltonianSpec& spec);

HamiltonianSpec build_model(Model model, int n, const ModelParams& params = {});
HamiltonianSpec build_model(const std::string& model, int n, const ModelParams& params = {});

// Pads an operator acting on `first..first+r-1` to the full 2^n space.
DenseTensor pad_operator(const DenseTensor& op, int first, int n);

DenseTensor to_dense(const HamiltonianSpec& spec);
Mpo to_mpo(const HamiltonianSpec& spec);

// Groups ordered as [1-site, 2-site even, 2-site odd, 3-site r0, r1, r2]; empty groups dropped.
std::vector<std::vector<LocalTerm>> commuting_groups(const HamiltonianSpec& spec);

}  // namespace bwc
