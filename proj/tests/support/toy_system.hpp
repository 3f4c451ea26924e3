#pragma once

#include "cdrc/data.hpp"
#include "cdrc/weights.hpp"

namespace cdrc::testing {

// Two periods, L0 -> A0 -> Y0 -> L1 -> A1 -> Y1, binary L and Y, A in {1,2,3}.
// Every conditional probability is a multiple of 1/5, so a dataset of 5^6 rows
// reproduces the joint law exactly. Treatment levels are indexed 0..2.
struct ToySystem {
  double l0 = 0.0;            // P(L0 = 1)
  double a0[2][3]{};          // P(A0 = k+1 | l0)
  double y0[2][3]{};          // P(Y0 = 1 | l0, a0)
  double l1[2][3][2]{};       // P(L1 = 1 | l0, a0, y0)
  double a1[2][3][2][2][3]{};  // P(A1 = k+1 | l0, a0, y0, l1)
  double y1[2][3][2][2][3]{};  // P(Y1 = 1 | l0, a0, y0, l1, a1)

  static ToySystem standard();

  double joint(int L0, int A0, int Y0, int L1, int A1, int Y1) const;
  double p_a0(int A0) const;                       // P(A0)
  double p_a1(int A1) const;                       // P(A1)
  double p_a1_given(int L0, int A0, int A1) const;  // P(A1 | A0, L0)

  Dataset dataset() const;
};

/// Brute-force weighted estimand for the constant-in-index trajectory
/// (A0, A1) at target time t, with the algorithm's weight rules and the
/// time-zero average divided by the weight total (hajek) or not.
struct ToyEnumeration {
  double value = 0.0;
  double weight_total = 0.0;  // E(w_0)
  bool undefined = false;
};
ToyEnumeration enumerate_weighted(const ToySystem& sys, int A0, int A1, int t, double c, WeightVariant variant);

/// E(Y_t | A0 [, A1]) straight from the joint.
double association(const ToySystem& sys, int A0, int A1, int t);
/// E(Y_t | A0 [, A1], L0) straight from the joint.
double association_given_l0(const ToySystem& sys, int L0, int A0, int A1, int t);

}  // namespace cdrc::testing
