#include "xchain/bn254.hpp"

#include <cstring>

namespace xchain::bn254 {

// ---------------------------------------------------------------- U256

int U256::bit_length() const {
  for (int i = 3; i >= 0; --i) {
    if (v[i] != 0) return 64 * (i + 1) - __builtin_clzll(v[i]);
  }
  return 0;
}

U256 u256_from_u64(uint64_t x) {
  U256 r;
  r.v[0] = x;
  return r;
}

U256 u256_from_be(const uint8_t* b) {
  U256 r;
  for (int i = 0; i < 4; ++i) {
    uint64_t w = 0;
    for (int j = 0; j < 8; ++j) w = (w << 8) | b[8 * i + j];
    r.v[3 - i] = w;
  }
  return r;
}

void u256_to_be(const U256& a, uint8_t* b) {
  for (int i = 0; i < 4; ++i) {
    uint64_t w = a.v[3 - i];
    for (int j = 0; j < 8; ++j) b[8 * i + j] = uint8_t(w >> (56 - 8 * j));
  }
}

int u256_cmp(const U256& a, const U256& b) {
  for (int i = 3; i >= 0; --i) {
    if (a.v[i] != b.v[i]) return a.v[i] < b.v[i] ? -1 : 1;
  }
  return 0;
}

uint64_t u256_add(U256& out, const U256& a, const U256& b) {
  unsigned __int128 c = 0;
  for (int i = 0; i < 4; ++i) {
    c += (unsigned __int128)a.v[i] + b.v[i];
    out.v[i] = (uint64_t)c;
    c >>= 64;
  }
  return (uint64_t)c;
}

uint64_t u256_sub(U256& out, const U256& a, const U256& b) {
  unsigned __int128 borrow = 0;
  for (int i = 0; i < 4; ++i) {
    unsigned __int128 d = (unsigned __int128)a.v[i] - b.v[i] - (uint64_t)borrow;
    out.v[i] = (uint64_t)d;
    borrow = (d >> 64) ? 1 : 0;
  }
  return (uint64_t)borrow;
}

U256 u256_div_u64(const U256& a, uint64_t d, uint64_t* rem) {
  U256 q;
  unsigned __int128 r = 0;
  for (int i = 3; i >= 0; --i) {
    r = (r << 64) | a.v[i];
    q.v[i] = (uint64_t)(r / d);
    r %= d;
  }
  if (rem) *rem = (uint64_t)r;
  return q;
}

// ------------------------------------------------------ field parameters

namespace {

// 2x mod m, assuming x < m < 2^255.
U256 mod_shl1(const U256& x, const U256& m) {
  U256 y;
  u256_add(y, x, x);
  if (u256_cmp(y, m) >= 0) u256_sub(y, y, m);
  return y;
}

FieldParams make_params(const U256& m) {
  FieldParams p;
  p.modulus = m;
  uint64_t inv = 1;
  for (int i = 0; i < 6; ++i) inv *= 2 - m.v[0] * inv;  // Newton mod 2^64
  p.n0inv = ~inv + 1;
  U256 x = u256_from_u64(1);
  for (int i = 0; i < 256; ++i) x = mod_shl1(x, m);
  p.one = x;
  for (int i = 0; i < 256; ++i) x = mod_shl1(x, m);
  p.r2 = x;
  return p;
}

constexpr U256 kP = {{0x3c208c16d87cfd47ull, 0x97816a916871ca8dull,
                      0xb85045b68181585dull, 0x30644e72e131a029ull}};
constexpr U256 kR = {{0x43e1f593f0000001ull, 0x2833e84879b97091ull,
                      0xb85045b68181585dull, 0x30644e72e131a029ull}};

// Montgomery CIOS multiplication: out = a * b * 2^-256 mod m.
void mont_mul(U256& out, const U256& a, const U256& b, const FieldParams& fp) {
  const uint64_t* m = fp.modulus.v;
  uint64_t t[6] = {0, 0, 0, 0, 0, 0};
  for (int i = 0; i < 4; ++i) {
    unsigned __int128 c = 0;
    for (int j = 0; j < 4; ++j) {
      c = (unsigned __int128)a.v[i] * b.v[j] + t[j] + (uint64_t)(c >> 64);
      t[j] = (uint64_t)c;
    }
    unsigned __int128 s = (unsigned __int128)t[4] + (uint64_t)(c >> 64);
    t[4] = (uint64_t)s;
    t[5] = (uint64_t)(s >> 64);

    uint64_t mm = t[0] * fp.n0inv;
    c = (unsigned __int128)mm * m[0] + t[0];
    for (int j = 1; j < 4; ++j) {
      c = (unsigned __int128)mm * m[j] + t[j] + (uint64_t)(c >> 64);
      t[j - 1] = (uint64_t)c;
    }
    s = (unsigned __int128)t[4] + (uint64_t)(c >> 64);
    t[3] = (uint64_t)s;
    t[4] = t[5] + (uint64_t)(s >> 64);
  }
  U256 r = {{t[0], t[1], t[2], t[3]}};
  if (t[4] != 0 || u256_cmp(r, fp.modulus) >= 0) u256_sub(r, r, fp.modulus);
  out = r;
}

}  // namespace

template <>
const FieldParams& Fe<FpTag>::params() {
  static const FieldParams p = make_params(kP);
  return p;
}

template <>
const FieldParams& Fe<FrTag>::params() {
  static const FieldParams p = make_params(kR);
  return p;
}

template <class Tag>
Fe<Tag> Fe<Tag>::one() {
  Fe r;
  r.m_ = params().one;
  return r;
}

template <class Tag>
Fe<Tag> Fe<Tag>::from_u64(uint64_t x) {
  Fe r;
  mont_mul(r.m_, u256_from_u64(x), params().r2, params());
  return r;
}

template <class Tag>
Fe<Tag> Fe<Tag>::from_be_reduce(const uint8_t* b32) {
  U256 x = u256_from_be(b32);
  const U256& m = params().modulus;
  while (u256_cmp(x, m) >= 0) u256_sub(x, x, m);
  Fe r;
  mont_mul(r.m_, x, params().r2, params());
  return r;
}

template <class Tag>
std::optional<Fe<Tag>> Fe<Tag>::from_be_canonical(const uint8_t* b32) {
  U256 x = u256_from_be(b32);
  if (u256_cmp(x, params().modulus) >= 0) return std::nullopt;
  Fe r;
  mont_mul(r.m_, x, params().r2, params());
  return r;
}

template <class Tag>
U256 Fe<Tag>::to_u256() const {
  U256 r;
  mont_mul(r, m_, u256_from_u64(1), params());
  return r;
}

template <class Tag>
void Fe<Tag>::to_be(uint8_t* b32) const {
  u256_to_be(to_u256(), b32);
}

template <class Tag>
Fe<Tag> Fe<Tag>::operator+(const Fe& o) const {
  Fe r;
  u256_add(r.m_, m_, o.m_);
  if (u256_cmp(r.m_, params().modulus) >= 0) u256_sub(r.m_, r.m_, params().modulus);
  return r;
}

template <class Tag>
Fe<Tag> Fe<Tag>::operator-(const Fe& o) const {
  Fe r;
  if (u256_sub(r.m_, m_, o.m_)) u256_add(r.m_, r.m_, params().modulus);
  return r;
}

template <class Tag>
Fe<Tag> Fe<Tag>::operator-() const {
  Fe r;
  if (m_.is_zero()) return *this;
  u256_sub(r.m_, params().modulus, m_);
  return r;
}

template <class Tag>
Fe<Tag> Fe<Tag>::operator*(const Fe& o) const {
  Fe r;
  mont_mul(r.m_, m_, o.m_, params());
  return r;
}

template <class Tag>
Fe<Tag> Fe<Tag>::pow(const U256& e) const {
  Fe acc = one();
  int n = e.bit_length();
  for (int i = n - 1; i >= 0; --i) {
    acc = acc.square();
    if (e.bit(i)) acc = acc * *this;
  }
  return acc;
}

template <class Tag>
Fe<Tag> Fe<Tag>::inverse() const {
  U256 e;
  u256_sub(e, params().modulus, u256_from_u64(2));
  return pow(e);
}

template class Fe<FpTag>;
template class Fe<FrTag>;

std::optional<Fp> fp_sqrt(const Fp& a) {
  // p = 3 mod 4: candidate = a^((p+1)/4).
  U256 e;
  u256_add(e, Fp::modulus(), u256_from_u64(1));
  e = u256_div_u64(e, 4);
  Fp cand = a.pow(e);
  if (cand.square() == a) return cand;
  return std::nullopt;
}

// --------------------------------------------------------------- tower

Fp2 Fp2::operator*(const Fp2& o) const {
  Fp t0 = c0 * o.c0;
  Fp t1 = c1 * o.c1;
  Fp cross = (c0 + c1) * (o.c0 + o.c1);
  return {t0 - t1, cross - t0 - t1};
}

Fp2 Fp2::square() const {
  Fp a = (c0 + c1) * (c0 - c1);
  Fp b = (c0 * c1).dbl();
  return {a, b};
}

Fp2 Fp2::inverse() const {
  Fp n = c0.square() + c1.square();
  Fp ni = n.inverse();
  return {c0 * ni, -(c1 * ni)};
}

Fp2 Fp2::mul_xi() const {
  // (9 + u)(c0 + c1 u) = (9 c0 - c1) + (9 c1 + c0) u
  Fp nine0 = c0.dbl().dbl().dbl() + c0;
  Fp nine1 = c1.dbl().dbl().dbl() + c1;
  return {nine0 - c1, nine1 + c0};
}

Fp2 Fp2::pow(const U256& e) const {
  Fp2 acc = one();
  for (int i = e.bit_length() - 1; i >= 0; --i) {
    acc = acc.square();
    if (e.bit(i)) acc = acc * *this;
  }
  return acc;
}

std::optional<Fp2> fp2_sqrt(const Fp2& a) {
  if (a.is_zero()) return Fp2::zero();
  if (a.c1.is_zero()) {
    if (auto s = fp_sqrt(a.c0)) return Fp2{*s, Fp::zero()};
    auto s = fp_sqrt(-a.c0);
    if (!s) return std::nullopt;  // unreachable: one of +-c0 is a square
    return Fp2{Fp::zero(), *s};
  }
  // Complex method for u^2 = -1: norm = c0^2 + c1^2 must be a square in Fp.
  Fp norm = a.c0.square() + a.c1.square();
  auto alpha = fp_sqrt(norm);
  if (!alpha) return std::nullopt;
  Fp half = Fp::from_u64(2).inverse();
  Fp delta = (a.c0 + *alpha) * half;
  auto x0 = fp_sqrt(delta);
  if (!x0) {
    delta = (a.c0 - *alpha) * half;
    x0 = fp_sqrt(delta);
    if (!x0) return std::nullopt;
  }
  Fp x1 = a.c1 * half * x0->inverse();
  Fp2 cand{*x0, x1};
  if (cand.square() == a) return cand;
  return std::nullopt;
}

Fp6 Fp6::operator*(const Fp6& o) const {
  Fp2 t0 = c0 * o.c0;
  Fp2 t1 = c1 * o.c1;
  Fp2 t2 = c2 * o.c2;
  Fp2 r0 = t0 + ((c1 + c2) * (o.c1 + o.c2) - t1 - t2).mul_xi();
  Fp2 r1 = (c0 + c1) * (o.c0 + o.c1) - t0 - t1 + t2.mul_xi();
  Fp2 r2 = (c0 + c2) * (o.c0 + o.c2) - t0 - t2 + t1;
  return {r0, r1, r2};
}

Fp6 Fp6::inverse() const {
  Fp2 a = c0.square() - (c1 * c2).mul_xi();
  Fp2 b = c2.square().mul_xi() - c0 * c1;
  Fp2 c = c1.square() - c0 * c2;
  Fp2 f = c0 * a + (c1 * c + c2 * b).mul_xi();
  Fp2 fi = f.inverse();
  return {a * fi, b * fi, c * fi};
}

Fp12 Fp12::operator*(const Fp12& o) const {
  Fp6 t0 = c0 * o.c0;
  Fp6 t1 = c1 * o.c1;
  Fp6 cross = (c0 + c1) * (o.c0 + o.c1);
  return {t0 + t1.mul_v(), cross - t0 - t1};
}

Fp12 Fp12::square() const {
  Fp6 t0 = c0 * c1;
  Fp6 a = (c0 + c1) * (c0 + c1.mul_v()) - t0 - t0.mul_v();
  return {a, t0 + t0};
}

Fp12 Fp12::inverse() const {
  Fp6 n = c0.square() - c1.square().mul_v();
  Fp6 ni = n.inverse();
  return {c0 * ni, -(c1 * ni)};
}

namespace {

// Frobenius multipliers: gamma[k] = xi^(k (p-1)/6) for k = 0..5. The
// coefficient of w^i v^j (basis element w^(i+2j)) picks up gamma[i+2j].
const std::array<Fp2, 6>& frobenius_gammas() {
  static const std::array<Fp2, 6> g = [] {
    U256 e;
    u256_sub(e, Fp::modulus(), u256_from_u64(1));
    e = u256_div_u64(e, 6);
    Fp2 xi{Fp::from_u64(9), Fp::one()};
    Fp2 base = xi.pow(e);
    std::array<Fp2, 6> out;
    out[0] = Fp2::one();
    for (int k = 1; k < 6; ++k) out[k] = out[k - 1] * base;
    return out;
  }();
  return g;
}

}  // namespace

Fp12 Fp12::frobenius() const {
  const auto& g = frobenius_gammas();
  Fp12 r;
  r.c0.c0 = c0.c0.conjugate();
  r.c0.c1 = c0.c1.conjugate() * g[2];
  r.c0.c2 = c0.c2.conjugate() * g[4];
  r.c1.c0 = c1.c0.conjugate() * g[1];
  r.c1.c1 = c1.c1.conjugate() * g[3];
  r.c1.c2 = c1.c2.conjugate() * g[5];
  return r;
}

Fp12 Fp12::frobenius_n(int n) const {
  Fp12 r = *this;
  for (int i = 0; i < n; ++i) r = r.frobenius();
  return r;
}

Fp12 Fp12::pow(const U256& e) const {
  Fp12 acc = one();
  for (int i = e.bit_length() - 1; i >= 0; --i) {
    acc = acc.square();
    if (e.bit(i)) acc = acc * *this;
  }
  return acc;
}

// --------------------------------------------------------------- groups

const Fp& G1Traits::coeff_b() {
  static const Fp b = Fp::from_u64(3);
  return b;
}

const Fp2& G2Traits::coeff_b() {
  // 3 / (9 + u)
  static const Fp2 b = Fp2{Fp::from_u64(3), Fp::zero()} *
                       Fp2{Fp::from_u64(9), Fp::one()}.inverse();
  return b;
}

template <class F, class Traits>
Point<F, Traits> Point<F, Traits>::from_affine(const Affine<F>& a) {
  if (a.infinity) return infinity();
  return {a.x, a.y, F::one()};
}

template <class F, class Traits>
Point<F, Traits> Point<F, Traits>::dbl() const {
  if (is_infinity()) return *this;
  F a = x.square();
  F b = y.square();
  F c = b.square();
  F d = ((x + b).square() - a - c).dbl();
  F e = a + a + a;
  F f = e.square();
  F x3 = f - d - d;
  F eight_c = c.dbl().dbl().dbl();
  F y3 = e * (d - x3) - eight_c;
  F z3 = (y * z).dbl();
  return {x3, y3, z3};
}

template <class F, class Traits>
Point<F, Traits> Point<F, Traits>::add(const Point& o) const {
  if (is_infinity()) return o;
  if (o.is_infinity()) return *this;
  F z1z1 = z.square();
  F z2z2 = o.z.square();
  F u1 = x * z2z2;
  F u2 = o.x * z1z1;
  F s1 = y * o.z * z2z2;
  F s2 = o.y * z * z1z1;
  if (u1 == u2) {
    if (s1 == s2) return dbl();
    return infinity();
  }
  F h = u2 - u1;
  F i = h.dbl().square();
  F j = h * i;
  F rr = (s2 - s1).dbl();
  F v = u1 * i;
  F x3 = rr.square() - j - v.dbl();
  F y3 = rr * (v - x3) - (s1 * j).dbl();
  F z3 = ((z + o.z).square() - z1z1 - z2z2) * h;
  return {x3, y3, z3};
}

template <class F, class Traits>
Point<F, Traits> Point<F, Traits>::mul(const U256& scalar) const {
  Point acc = infinity();
  for (int i = scalar.bit_length() - 1; i >= 0; --i) {
    acc = acc.dbl();
    if (scalar.bit(i)) acc = acc.add(*this);
  }
  return acc;
}

template <class F, class Traits>
Affine<F> Point<F, Traits>::to_affine() const {
  if (is_infinity()) return {};
  F zi = z.inverse();
  F zi2 = zi.square();
  return {x * zi2, y * zi2 * zi, false};
}

template <class F, class Traits>
bool Point<F, Traits>::eq(const Point& o) const {
  if (is_infinity() || o.is_infinity()) return is_infinity() == o.is_infinity();
  F z1z1 = z.square();
  F z2z2 = o.z.square();
  return x * z2z2 == o.x * z1z1 && y * o.z * z2z2 == o.y * z * z1z1;
}

template struct Point<Fp, G1Traits>;
template struct Point<Fp2, G2Traits>;

namespace {

Fp fp_from_dec_limbs(const U256& limbs) {
  uint8_t be[32];
  u256_to_be(limbs, be);
  return Fp::from_be_reduce(be);
}

}  // namespace

const G1& g1_generator() {
  static const G1 g = {Fp::from_u64(1), Fp::from_u64(2), Fp::one()};
  return g;
}

const G2& g2_generator() {
  static const G2 g = [] {
    Affine<Fp2> a;
    a.x = {fp_from_dec_limbs({{0x46debd5cd992f6edull, 0x674322d4f75edaddull,
                               0x426a00665e5c4479ull, 0x1800deef121f1e76ull}}),
           fp_from_dec_limbs({{0x97e485b7aef312c2ull, 0xf1aa493335a9e712ull,
                               0x7260bfb731fb5d25ull, 0x198e9393920d483aull}})};
    a.y = {fp_from_dec_limbs({{0x4ce6cc0166fa7daaull, 0xe3d1e7690c43d37bull,
                               0x4aab71808dcb408full, 0x12c85ea5db8c6debull}}),
           fp_from_dec_limbs({{0x55acdadcd122975bull, 0xbc4b313370b38ef3ull,
                               0xec9e99ad690c3395ull, 0x090689d0585ff075ull}})};
    a.infinity = false;
    if (!g2_on_curve(a)) throw std::logic_error("bn254: bad G2 generator");
    return G2::from_affine(a);
  }();
  return g;
}

bool g1_on_curve(const Affine<Fp>& a) {
  if (a.infinity) return true;
  return a.y.square() == a.x.square() * a.x + G1Traits::coeff_b();
}

bool g2_on_curve(const Affine<Fp2>& a) {
  if (a.infinity) return true;
  return a.y.square() == a.x.square() * a.x + G2Traits::coeff_b();
}

bool g2_in_subgroup(const Affine<Fp2>& a) {
  if (a.infinity) return true;
  if (!g2_on_curve(a)) return false;
  return G2::from_affine(a).mul(Fr::modulus()).is_infinity();
}

G1 hash_to_g1(const Bytes& message) {
  static const std::string domain = "xchain.bn254.g1.v1";
  for (int ctr = 0; ctr < 256; ++ctr) {
    Sha256 h;
    h.update(domain);
    uint8_t c = uint8_t(ctr);
    h.update(&c, 1);
    h.update(message);
    Hash256 digest = h.finish();
    Fp x = Fp::from_be_reduce(digest.data());
    Fp t = x.square() * x + G1Traits::coeff_b();
    if (auto y = fp_sqrt(t)) {
      bool want_odd = (digest[0] & 1) != 0;
      Fp yy = (y->odd() == want_odd) ? *y : -*y;
      return G1{x, yy, Fp::one()};
    }
  }
  throw std::logic_error("bn254: hash_to_g1 exhausted counters");
}

// --------------------------------------------------------- serialization

std::array<uint8_t, kG1CompressedSize> g1_compress(const G1& p) {
  std::array<uint8_t, kG1CompressedSize> out{};
  Affine<Fp> a = p.to_affine();
  if (a.infinity) return out;
  out[0] = a.y.odd() ? 0x03 : 0x02;
  a.x.to_be(out.data() + 1);
  return out;
}

std::optional<G1> g1_decompress(const uint8_t* b, size_t len) {
  if (len != kG1CompressedSize) return std::nullopt;
  if (b[0] == 0x00) {
    for (size_t i = 1; i < len; ++i) {
      if (b[i] != 0) return std::nullopt;
    }
    return G1::infinity();
  }
  if (b[0] != 0x02 && b[0] != 0x03) return std::nullopt;
  auto x = Fp::from_be_canonical(b + 1);
  if (!x) return std::nullopt;
  Fp t = x->square() * *x + G1Traits::coeff_b();
  auto y = fp_sqrt(t);
  if (!y) return std::nullopt;
  bool want_odd = b[0] == 0x03;
  Fp yy = (y->odd() == want_odd) ? *y : -*y;
  return G1{*x, yy, Fp::one()};
}

std::array<uint8_t, kG2CompressedSize> g2_compress(const G2& p) {
  std::array<uint8_t, kG2CompressedSize> out{};
  Affine<Fp2> a = p.to_affine();
  if (a.infinity) return out;
  bool odd = a.y.c0.is_zero() ? a.y.c1.odd() : a.y.c0.odd();
  out[0] = odd ? 0x03 : 0x02;
  a.x.c1.to_be(out.data() + 1);
  a.x.c0.to_be(out.data() + 33);
  return out;
}

std::optional<G2> g2_decompress(const uint8_t* b, size_t len) {
  if (len != kG2CompressedSize) return std::nullopt;
  if (b[0] == 0x00) {
    for (size_t i = 1; i < len; ++i) {
      if (b[i] != 0) return std::nullopt;
    }
    return G2::infinity();
  }
  if (b[0] != 0x02 && b[0] != 0x03) return std::nullopt;
  auto x1 = Fp::from_be_canonical(b + 1);
  auto x0 = Fp::from_be_canonical(b + 33);
  if (!x0 || !x1) return std::nullopt;
  Fp2 x{*x0, *x1};
  Fp2 t = x.square() * x + G2Traits::coeff_b();
  auto y = fp2_sqrt(t);
  if (!y) return std::nullopt;
  bool odd = y->c0.is_zero() ? y->c1.odd() : y->c0.odd();
  Fp2 yy = (odd == (b[0] == 0x03)) ? *y : -*y;
  Affine<Fp2> a{x, yy, false};
  if (!g2_in_subgroup(a)) return std::nullopt;
  return G2::from_affine(a);
}

// --------------------------------------------------------------- pairing

namespace {

// Affine point with both coordinates embedded in Fp12, used by the Miller
// loop so that line evaluations need no twist-specific sparse formulas.
struct Pt12 {
  Fp12 x, y;
};

Fp12 embed_fp(const Fp& a) {
  Fp12 r;
  r.c0.c0.c0 = a;
  return r;
}

Pt12 embed_g1(const Affine<Fp>& a) { return {embed_fp(a.x), embed_fp(a.y)}; }

// Twist embedding psi(x', y') = (x' w^2, y' w^3); w^2 = v.
Pt12 embed_g2(const Affine<Fp2>& a) {
  Fp12 x, y;
  x.c0.c1 = a.x;  // coefficient of v
  y.c1.c1 = a.y;  // coefficient of v w
  return {x, y};
}

// Line through T (doubling) evaluated at P; T is updated to 2T.
Fp12 line_double(Pt12& t, const Pt12& p) {
  Fp12 slope = t.x.square();
  slope = (slope + slope + slope) * (t.y + t.y).inverse();
  Fp12 line = slope * (p.x - t.x) + t.y - p.y;
  Fp12 x3 = slope.square() - t.x - t.x;
  t.y = slope * (t.x - x3) - t.y;
  t.x = x3;
  return line;
}

// Line through T and Q evaluated at P; T is updated to T + Q.
Fp12 line_add(Pt12& t, const Pt12& q, const Pt12& p) {
  if (t.x == q.x) {
    if (t.y == q.y) return line_double(t, p);
    throw std::logic_error("bn254: degenerate Miller addition step");
  }
  Fp12 slope = (q.y - t.y) * (q.x - t.x).inverse();
  Fp12 line = slope * (p.x - t.x) + t.y - p.y;
  Fp12 x3 = slope.square() - t.x - q.x;
  t.y = slope * (t.x - x3) - t.y;
  t.x = x3;
  return line;
}

Fp12 frobenius_pt_x(const Fp12& c) { return c.frobenius(); }

Fp12 miller_loop_affine(const Affine<Fp>& pa, const Affine<Fp2>& qa) {
  const Pt12 p = embed_g1(pa);
  const Pt12 q = embed_g2(qa);
  // Optimal ate loop length 6x + 2.
  const U256 s = {{0x9d797039be763ba8ull, 0x0000000000000001ull, 0, 0}};
  Fp12 f = Fp12::one();
  Pt12 t = q;
  for (int i = s.bit_length() - 2; i >= 0; --i) {
    f = f.square() * line_double(t, p);
    if (s.bit(i)) f = f * line_add(t, q, p);
  }
  Pt12 q1{frobenius_pt_x(q.x), frobenius_pt_x(q.y)};
  Pt12 q2{frobenius_pt_x(q1.x), frobenius_pt_x(q1.y)};
  f = f * line_add(t, q1, p);
  Pt12 q2n{q2.x, Fp12::zero() - q2.y};
  f = f * line_add(t, q2n, p);
  return f;
}

// Sparse line l = a + b w + c v w with a, b, c in Fp2. Lines are scaled by
// Fp2 constants to avoid inversions; the final exponentiation kills any
// factor from a proper subfield, so pairings are unaffected.
struct Line {
  Fp2 a, b, c;
};

// Fp6 times (b + c v).
Fp6 mul_sparse01(const Fp6& g, const Fp2& b, const Fp2& c) {
  return {g.c0 * b + (g.c2 * c).mul_xi(), g.c0 * c + g.c1 * b,
          g.c1 * c + g.c2 * b};
}

// f *= (a + b w + c v w).
Fp12 mul_line(const Fp12& f, const Line& l) {
  Fp6 t1 = mul_sparse01(f.c1, l.b, l.c);
  Fp6 t0 = mul_sparse01(f.c0, l.b, l.c);
  return {f.c0.mul_fp2(l.a) + t1.mul_v(), t0 + f.c1.mul_fp2(l.a)};
}

// Homogeneous projective twist point (x, y) = (X/Z, Y/Z). The step
// functions advance the point and return the line through the operands
// evaluated at the affine G1 argument.
struct Proj2 {
  Fp2 x, y, z;
};

Line dbl_step(Proj2& t, const Affine<Fp>& p) {
  Fp2 xx = t.x.square();
  Fp2 yy = t.y.square();
  Fp2 yz = t.y * t.z;
  Fp2 xxx = t.x * xx;
  Fp2 xxz = xx * t.z;
  Fp2 yyz = yy * t.z;
  Fp2 three_xxx = xxx.dbl() + xxx;

  Line l;
  l.a = -(yz * t.z).dbl().mul_fp(p.y);
  l.b = (xxz.dbl() + xxz).mul_fp(p.x);
  l.c = yyz.dbl() - three_xxx;

  Fp2 x4 = xx.square();
  Fp2 xyyz = t.x * yyz;
  Fp2 nine_x4 = x4.dbl().dbl().dbl() + x4;
  Fp2 nine_xxx = three_xxx.dbl() + three_xxx;
  t.x = yz.dbl() * (nine_x4 - xyyz.dbl().dbl().dbl());
  t.y = nine_xxx * (yyz.dbl().dbl() - three_xxx) -
        yyz.square().dbl().dbl().dbl();
  t.z = (yz.square() * yz).dbl().dbl().dbl();
  return l;
}

Line add_step(Proj2& t, const Affine<Fp2>& q, const Affine<Fp>& p) {
  Fp2 theta = q.y * t.z - t.y;
  Fp2 omega = q.x * t.z - t.x;
  if (omega.is_zero()) {
    if (theta.is_zero()) return dbl_step(t, p);
    throw std::logic_error("bn254: degenerate Miller addition step");
  }
  Line l;
  l.a = -omega.mul_fp(p.y);
  l.b = theta.mul_fp(p.x);
  l.c = omega * q.y - theta * q.x;

  Fp2 ii = omega.square();
  Fp2 jj = omega * ii;
  Fp2 kk = theta.square();
  Fp2 ix = ii * t.x;
  Fp2 numx = kk * t.z - jj - ix.dbl();
  t.y = theta * (ix - numx) - jj * t.y;
  t.x = omega * numx;
  t.z = jj * t.z;
  return l;
}

Fp12 miller_loop_fast(const Affine<Fp>& pa, const Affine<Fp2>& qa) {
  // Optimal ate loop length 6x + 2.
  const U256 s = {{0x9d797039be763ba8ull, 0x0000000000000001ull, 0, 0}};
  Fp12 f = Fp12::one();
  Proj2 t{qa.x, qa.y, Fp2::one()};
  for (int i = s.bit_length() - 2; i >= 0; --i) {
    f = mul_line(f.square(), dbl_step(t, pa));
    if (s.bit(i)) f = mul_line(f, add_step(t, qa, pa));
  }
  // Untwist-Frobenius-twist endomorphism on the twist coordinates:
  // x -> conj(x) xi^((p-1)/3), y -> conj(y) xi^((p-1)/2).
  const auto& g = frobenius_gammas();
  Affine<Fp2> q1{qa.x.conjugate() * g[2], qa.y.conjugate() * g[3], false};
  Affine<Fp2> q2n{q1.x.conjugate() * g[2], -(q1.y.conjugate() * g[3]), false};
  f = mul_line(f, add_step(t, q1, pa));
  f = mul_line(f, add_step(t, q2n, pa));
  return f;
}

// Squaring in Fp4 = Fp2[s]/(s^2 - xi): (a + b s)^2.
void fp4_square(const Fp2& a, const Fp2& b, Fp2& r0, Fp2& r1) {
  Fp2 t0 = a.square();
  Fp2 t1 = b.square();
  r1 = (a + b).square() - t0 - t1;
  r0 = t0 + t1.mul_xi();
}

// Granger-Scott squaring, valid only in the cyclotomic subgroup (which
// contains everything downstream of the easy part of the final
// exponentiation).
Fp12 cyclotomic_square(const Fp12& f) {
  Fp2 z0 = f.c0.c0, z4 = f.c0.c1, z3 = f.c0.c2;
  Fp2 z2 = f.c1.c0, z1 = f.c1.c1, z5 = f.c1.c2;
  Fp2 t0, t1, a0, a1, b0, b1;
  fp4_square(z0, z1, t0, t1);
  z0 = (t0 - z0).dbl() + t0;
  z1 = (t1 + z1).dbl() + t1;
  fp4_square(z2, z3, a0, a1);
  fp4_square(z4, z5, b0, b1);
  z4 = (a0 - z4).dbl() + a0;
  z5 = (a1 + z5).dbl() + a1;
  Fp2 t = b1.mul_xi();
  z2 = (t + z2).dbl() + t;
  z3 = (b0 - z3).dbl() + b0;
  return {{z0, z4, z3}, {z2, z1, z5}};
}

Fp12 pow_x(const Fp12& f) {
  U256 e = u256_from_u64(kCurveX);
  Fp12 acc = Fp12::one();
  for (int i = e.bit_length() - 1; i >= 0; --i) {
    acc = cyclotomic_square(acc);
    if (e.bit(i)) acc = acc * f;
  }
  return acc;
}

}  // namespace

Fp12 miller_loop(const G1& p, const G2& q) {
  Affine<Fp> pa = p.to_affine();
  Affine<Fp2> qa = q.to_affine();
  if (pa.infinity || qa.infinity) return Fp12::one();
  return miller_loop_fast(pa, qa);
}

Fp12 miller_loop_reference(const G1& p, const G2& q) {
  Affine<Fp> pa = p.to_affine();
  Affine<Fp2> qa = q.to_affine();
  if (pa.infinity || qa.infinity) return Fp12::one();
  return miller_loop_affine(pa, qa);
}

Fp12 final_exponentiation(const Fp12& f) {
  // Easy part: f^((p^6 - 1)(p^2 + 1)).
  Fp12 t = f.conjugate() * f.inverse();
  t = t.frobenius_n(2) * t;

  // Hard part, x-based addition chain for (p^4 - p^2 + 1)/r.
  Fp12 fp1 = t.frobenius();
  Fp12 fp2 = t.frobenius_n(2);
  Fp12 fp3 = fp2.frobenius();
  Fp12 fu = pow_x(t);
  Fp12 fu2 = pow_x(fu);
  Fp12 fu3 = pow_x(fu2);
  Fp12 y3 = (fu.frobenius()).conjugate();
  Fp12 fu2p = fu2.frobenius();
  Fp12 fu3p = fu3.frobenius();
  Fp12 y2 = fu2.frobenius_n(2);
  Fp12 y0 = fp1 * fp2 * fp3;
  Fp12 y1 = t.conjugate();
  Fp12 y5 = fu2.conjugate();
  Fp12 y4 = (fu * fu2p).conjugate();
  Fp12 y6 = (fu3 * fu3p).conjugate();

  Fp12 t0 = cyclotomic_square(y6) * y4 * y5;
  Fp12 t1 = y3 * y5 * t0;
  t0 = t0 * y2;
  t1 = cyclotomic_square(t1) * t0;
  t1 = cyclotomic_square(t1);
  t0 = t1 * y1;
  t1 = t1 * y0;
  t0 = cyclotomic_square(t0);
  return t0 * t1;
}

Fp12 pairing(const G1& p, const G2& q) {
  return final_exponentiation(miller_loop(p, q));
}

Fp12 pairing_product(const G1& p1, const G2& q1, const G1& p2, const G2& q2) {
  return final_exponentiation(miller_loop(p1, q1) * miller_loop(p2, q2));
}

}  // namespace xchain::bn254
