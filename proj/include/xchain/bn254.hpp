#pragma once

// Pairing-friendly curve arithmetic for BN254 (alt_bn128):
//   E  : y^2 = x^3 + 3            over Fp   (group G1, signatures)
//   E' : y^2 = x^3 + 3/(9+u)      over Fp2  (group G2, public keys)
// with the optimal ate pairing e : G1 x G2 -> Fp12.
//
// The implementation favours auditability over raw speed: the Miller loop
// runs on affine points embedded in Fp12, and the tower/Frobenius constants
// are derived at startup from the field definition rather than hardcoded.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "xchain/sha256.hpp"

namespace xchain::bn254 {

// 256-bit little-endian limbs.
struct U256 {
  uint64_t v[4] = {0, 0, 0, 0};

  bool operator==(const U256&) const = default;
  bool is_zero() const { return v[0] == 0 && v[1] == 0 && v[2] == 0 && v[3] == 0; }
  bool bit(int i) const { return (v[i / 64] >> (i % 64)) & 1; }
  int bit_length() const;
};

U256 u256_from_u64(uint64_t x);
U256 u256_from_be(const uint8_t* b32);
void u256_to_be(const U256& a, uint8_t* b32);
int u256_cmp(const U256& a, const U256& b);
// a + b, returns carry.
uint64_t u256_add(U256& out, const U256& a, const U256& b);
// a - b, returns borrow.
uint64_t u256_sub(U256& out, const U256& a, const U256& b);
U256 u256_div_u64(const U256& a, uint64_t d, uint64_t* rem = nullptr);

struct FieldParams {
  U256 modulus;
  U256 r2;        // 2^512 mod modulus
  U256 one;       // 2^256 mod modulus (Montgomery 1)
  uint64_t n0inv; // -modulus^{-1} mod 2^64
};

struct FpTag;
struct FrTag;

// Prime field element in Montgomery form.
template <class Tag>
class Fe {
 public:
  Fe() = default;

  static const FieldParams& params();
  static const U256& modulus() { return params().modulus; }

  static Fe zero() { return Fe(); }
  static Fe one();
  static Fe from_u64(uint64_t x);
  // Interprets 32 big-endian bytes as an integer and reduces mod the modulus.
  static Fe from_be_reduce(const uint8_t* b32);
  // Rejects values >= modulus.
  static std::optional<Fe> from_be_canonical(const uint8_t* b32);

  U256 to_u256() const;  // canonical (non-Montgomery) value
  void to_be(uint8_t* b32) const;

  bool is_zero() const { return to_u256().is_zero(); }
  bool odd() const { return to_u256().bit(0); }
  bool operator==(const Fe& o) const { return m_ == o.m_; }

  Fe operator+(const Fe& o) const;
  Fe operator-(const Fe& o) const;
  Fe operator*(const Fe& o) const;
  Fe operator-() const;
  Fe& operator+=(const Fe& o) { return *this = *this + o; }
  Fe& operator-=(const Fe& o) { return *this = *this - o; }
  Fe& operator*=(const Fe& o) { return *this = *this * o; }

  Fe square() const { return *this * *this; }
  Fe pow(const U256& e) const;
  Fe inverse() const;  // 0 maps to 0
  Fe dbl() const { return *this + *this; }

 private:
  U256 m_;  // Montgomery representation
};

using Fp = Fe<FpTag>;
using Fr = Fe<FrTag>;

// Fp sqrt for p = 3 mod 4; nullopt if not a square.
std::optional<Fp> fp_sqrt(const Fp& a);

// ---- Extension tower: Fp2 = Fp[u]/(u^2+1), Fp6 = Fp2[v]/(v^3 - xi),
//      Fp12 = Fp6[w]/(w^2 - v), xi = 9 + u.

struct Fp2 {
  Fp c0, c1;  // c0 + c1*u

  static Fp2 zero() { return {}; }
  static Fp2 one() { return {Fp::one(), Fp::zero()}; }
  bool is_zero() const { return c0.is_zero() && c1.is_zero(); }
  bool operator==(const Fp2&) const = default;

  Fp2 operator+(const Fp2& o) const { return {c0 + o.c0, c1 + o.c1}; }
  Fp2 operator-(const Fp2& o) const { return {c0 - o.c0, c1 - o.c1}; }
  Fp2 operator-() const { return {-c0, -c1}; }
  Fp2 operator*(const Fp2& o) const;
  Fp2 square() const;
  Fp2 inverse() const;
  Fp2 conjugate() const { return {c0, -c1}; }
  Fp2 mul_fp(const Fp& s) const { return {c0 * s, c1 * s}; }
  Fp2 mul_xi() const;  // multiply by (9 + u)
  Fp2 dbl() const { return *this + *this; }
  Fp2 pow(const U256& e) const;
};

std::optional<Fp2> fp2_sqrt(const Fp2& a);

struct Fp6 {
  Fp2 c0, c1, c2;  // c0 + c1*v + c2*v^2

  static Fp6 zero() { return {}; }
  static Fp6 one() { return {Fp2::one(), Fp2::zero(), Fp2::zero()}; }
  bool is_zero() const { return c0.is_zero() && c1.is_zero() && c2.is_zero(); }
  bool operator==(const Fp6&) const = default;

  Fp6 operator+(const Fp6& o) const { return {c0 + o.c0, c1 + o.c1, c2 + o.c2}; }
  Fp6 operator-(const Fp6& o) const { return {c0 - o.c0, c1 - o.c1, c2 - o.c2}; }
  Fp6 operator-() const { return {-c0, -c1, -c2}; }
  Fp6 operator*(const Fp6& o) const;
  Fp6 square() const { return *this * *this; }
  Fp6 inverse() const;
  Fp6 mul_v() const { return {c2.mul_xi(), c0, c1}; }
  Fp6 mul_fp2(const Fp2& s) const { return {c0 * s, c1 * s, c2 * s}; }
};

struct Fp12 {
  Fp6 c0, c1;  // c0 + c1*w

  static Fp12 zero() { return {}; }
  static Fp12 one() { return {Fp6::one(), Fp6::zero()}; }
  bool is_zero() const { return c0.is_zero() && c1.is_zero(); }
  bool is_one() const { return *this == one(); }
  bool operator==(const Fp12&) const = default;

  Fp12 operator+(const Fp12& o) const { return {c0 + o.c0, c1 + o.c1}; }
  Fp12 operator-(const Fp12& o) const { return {c0 - o.c0, c1 - o.c1}; }
  Fp12 operator*(const Fp12& o) const;
  Fp12 square() const;
  Fp12 inverse() const;
  Fp12 conjugate() const { return {c0, -c1}; }
  Fp12 frobenius() const;         // x -> x^p
  Fp12 frobenius_n(int n) const;  // x -> x^(p^n)
  Fp12 pow(const U256& e) const;
  Fp12 mul_fp(const Fp& s) const { return {c0.mul_fp2({s, Fp::zero()}), c1.mul_fp2({s, Fp::zero()})}; }
};

// ---- Curve groups (Jacobian coordinates, a = 0 short Weierstrass).

template <class F>
struct Affine {
  F x, y;
  bool infinity = true;
  bool operator==(const Affine&) const = default;
};

template <class F, class Traits>
struct Point {
  F x, y, z;  // z == 0 encodes infinity

  static Point infinity() { return {F::zero(), F::one(), F::zero()}; }
  static Point from_affine(const Affine<F>& a);
  bool is_infinity() const { return z.is_zero(); }

  Point dbl() const;
  Point add(const Point& o) const;
  Point neg() const { return {x, -y, z}; }
  Point mul(const U256& scalar) const;
  Point mul(const Fr& scalar) const { return mul(scalar.to_u256()); }
  Affine<F> to_affine() const;
  // Equality as group elements.
  bool eq(const Point& o) const;
};

struct G1Traits {
  using Field = Fp;
  static const Fp& coeff_b();
};
struct G2Traits {
  using Field = Fp2;
  static const Fp2& coeff_b();
};

using G1 = Point<Fp, G1Traits>;
using G2 = Point<Fp2, G2Traits>;

const G1& g1_generator();
const G2& g2_generator();

bool g1_on_curve(const Affine<Fp>& a);
bool g2_on_curve(const Affine<Fp2>& a);
// Order-r subgroup membership (G1 has cofactor 1 on this curve).
bool g2_in_subgroup(const Affine<Fp2>& a);

// Deterministic hash to G1 (try-and-increment over sha256).
G1 hash_to_g1(const Bytes& message);

// ---- Serialization: fixed-length compressed encodings.
// G1: 1 prefix byte + 32-byte big-endian x. G2: 1 prefix byte + 64 bytes
// (x.c1 then x.c0, big-endian). Prefix 0x02/0x03 selects even/odd y
// (for G2, parity of y.c0, or of y.c1 when y.c0 is zero); prefix 0x00
// with a zero body encodes the point at infinity.

constexpr size_t kG1CompressedSize = 33;
constexpr size_t kG2CompressedSize = 65;

std::array<uint8_t, kG1CompressedSize> g1_compress(const G1& p);
std::array<uint8_t, kG2CompressedSize> g2_compress(const G2& p);
std::optional<G1> g1_decompress(const uint8_t* b, size_t len);
std::optional<G2> g2_decompress(const uint8_t* b, size_t len);

// ---- Pairing.

// Single optimal ate pairing e(P, Q).
Fp12 pairing(const G1& p, const G2& q);
// Product of pairings with a single shared final exponentiation.
Fp12 pairing_product(const G1& p1, const G2& q1, const G1& p2, const G2& q2);
// Miller loop only (no final exponentiation); infinity inputs yield 1.
Fp12 miller_loop(const G1& p, const G2& q);
// Slow generic Miller loop over Fp12-embedded points; kept as a
// cross-check oracle for the optimized implementation.
Fp12 miller_loop_reference(const G1& p, const G2& q);
Fp12 final_exponentiation(const Fp12& f);

// Curve parameter x with p = 36x^4 + 36x^3 + 24x^2 + 6x + 1.
constexpr uint64_t kCurveX = 0x44e992b44a6909f1ull;

}  // namespace xchain::bn254
