//! Symmetric (Type-A) pairing on the supersingular curve `y^2 = x^3 + x`.
//!
//! The base field is `F_p` with `p = h*q - 1`, `p ≡ 3 (mod 4)`, so the curve
//! has `p + 1` points and embedding degree 2. `G1` is the order-`q` subgroup of
//! `E(F_p)` and `GT` is the order-`q` subgroup of `F_{p^2}^*`. The pairing is the
//! reduced Tate pairing composed with the distortion map `(x, y) -> (-x, i*y)`,
//! which makes `e: G1 x G1 -> GT` symmetric and non-degenerate.
//!
//! Serialized elements are fixed-width big-endian: a `G1` point is `x || y`, a
//! `GT` element is `re || im`, each coordinate `coord_len` bytes. The identity
//! of `G1` encodes as all zeros (`(0, 0)` is 2-torsion, so it is never a valid
//! `G1` element).

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

use super::CryptoError;

/// Scalar in `Z_q`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Scalar(pub(crate) BigUint);

impl Scalar {
    pub fn from_biguint(v: BigUint) -> Self {
        Scalar(v)
    }

    pub fn from_u64(v: u64) -> Self {
        Scalar(BigUint::from(v))
    }

    pub fn as_biguint(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

/// A point of `G1` in affine coordinates; `None` is the point at infinity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct G1(Option<(BigUint, BigUint)>);

impl G1 {
    pub fn identity() -> Self {
        G1(None)
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_none()
    }

    pub fn coords(&self) -> Option<(&BigUint, &BigUint)> {
        self.0.as_ref().map(|(x, y)| (x, y))
    }

    pub(crate) fn from_affine(x: BigUint, y: BigUint) -> Self {
        G1(Some((x, y)))
    }
}

/// An element `re + im*i` of `F_{p^2}`; members of `GT` have norm one.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Gt {
    pub(crate) re: BigUint,
    pub(crate) im: BigUint,
}

impl Gt {
    pub fn one() -> Self {
        Gt { re: BigUint::one(), im: BigUint::zero() }
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }
}

/// Jacobian coordinates: `x = X/Z^2`, `y = Y/Z^3`; `Z = 0` is infinity.
#[derive(Clone, Debug)]
struct Jacobian {
    x: BigUint,
    y: BigUint,
    z: BigUint,
}

/// Curve and field constants shared by every group operation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairingGroup {
    p: BigUint,
    q: BigUint,
    cofactor: BigUint,
    /// `(p + 1) / q`, the hard part of the final exponentiation.
    final_exp: BigUint,
    coord_len: usize,
}

impl PairingGroup {
    /// Builds a group from a field prime `p` and subgroup order `q`.
    pub fn new(p: BigUint, q: BigUint) -> Result<Self, CryptoError> {
        let four = BigUint::from(4u32);
        if &p % &four != BigUint::from(3u32) {
            return Err(CryptoError::Config("field prime must be 3 mod 4".into()));
        }
        let order = &p + 1u32;
        if !(&order % &q).is_zero() {
            return Err(CryptoError::Config("q must divide p + 1".into()));
        }
        let cofactor = &order / &q;
        let coord_len = p.bits().div_ceil(8) as usize;
        Ok(PairingGroup { final_exp: cofactor.clone(), cofactor, coord_len, p, q })
    }

    pub fn field_prime(&self) -> &BigUint {
        &self.p
    }

    pub fn order(&self) -> &BigUint {
        &self.q
    }

    pub fn cofactor(&self) -> &BigUint {
        &self.cofactor
    }

    /// Natural byte width of one field coordinate.
    pub fn coord_len(&self) -> usize {
        self.coord_len
    }

    // --- F_p -------------------------------------------------------------

    fn fadd(&self, a: &BigUint, b: &BigUint) -> BigUint {
        let s = a + b;
        if s >= self.p {
            s - &self.p
        } else {
            s
        }
    }

    fn fsub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        if a >= b {
            a - b
        } else {
            &self.p - (b - a)
        }
    }

    fn fmul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.p
    }

    fn fsqr(&self, a: &BigUint) -> BigUint {
        (a * a) % &self.p
    }

    fn fneg(&self, a: &BigUint) -> BigUint {
        if a.is_zero() {
            BigUint::zero()
        } else {
            &self.p - a
        }
    }

    fn fsmall(&self, a: &BigUint, k: u32) -> BigUint {
        (a * k) % &self.p
    }

    fn finv(&self, a: &BigUint) -> Option<BigUint> {
        a.modinv(&self.p)
    }

    // --- F_{p^2}, i^2 = -1 ------------------------------------------------

    fn gt_mul_raw(&self, a: &Gt, b: &Gt) -> Gt {
        let ac = self.fmul(&a.re, &b.re);
        let bd = self.fmul(&a.im, &b.im);
        let ad = self.fmul(&a.re, &b.im);
        let bc = self.fmul(&a.im, &b.re);
        Gt { re: self.fsub(&ac, &bd), im: self.fadd(&ad, &bc) }
    }

    fn gt_sqr_raw(&self, a: &Gt) -> Gt {
        // (a + bi)^2 = (a + b)(a - b) + 2ab i
        let s = self.fadd(&a.re, &a.im);
        let d = self.fsub(&a.re, &a.im);
        let ab = self.fmul(&a.re, &a.im);
        Gt { re: self.fmul(&s, &d), im: self.fadd(&ab, &ab) }
    }

    fn gt_conj(&self, a: &Gt) -> Gt {
        Gt { re: a.re.clone(), im: self.fneg(&a.im) }
    }

    fn gt_inv_raw(&self, a: &Gt) -> Option<Gt> {
        let norm = self.fadd(&self.fsqr(&a.re), &self.fsqr(&a.im));
        let inv = self.finv(&norm)?;
        let c = self.gt_conj(a);
        Some(Gt { re: self.fmul(&c.re, &inv), im: self.fmul(&c.im, &inv) })
    }

    fn gt_pow_raw(&self, a: &Gt, e: &BigUint) -> Gt {
        let mut acc = Gt::one();
        for i in (0..e.bits()).rev() {
            acc = self.gt_sqr_raw(&acc);
            if e.bit(i) {
                acc = self.gt_mul_raw(&acc, a);
            }
        }
        acc
    }

    /// Product in `GT`.
    pub fn gt_mul(&self, a: &Gt, b: &Gt) -> Gt {
        self.gt_mul_raw(a, b)
    }

    /// Inverse in `GT`. Elements of `GT` have norm one, so this is conjugation.
    pub fn gt_inv(&self, a: &Gt) -> Gt {
        self.gt_conj(a)
    }

    /// `a^e` in `GT`.
    pub fn gt_pow(&self, a: &Gt, e: &Scalar) -> Gt {
        self.gt_pow_raw(a, &e.0)
    }

    /// True iff `a` is a member of the order-`q` subgroup of `F_{p^2}^*`.
    pub fn gt_is_member(&self, a: &Gt) -> bool {
        if a.re >= self.p || a.im >= self.p {
            return false;
        }
        let norm = self.fadd(&self.fsqr(&a.re), &self.fsqr(&a.im));
        norm.is_one() && self.gt_pow_raw(a, &self.q).is_one()
    }

    // --- curve -------------------------------------------------------------

    /// True iff `(x, y)` satisfies `y^2 = x^3 + x`.
    pub fn on_curve(&self, x: &BigUint, y: &BigUint) -> bool {
        if x >= &self.p || y >= &self.p {
            return false;
        }
        let rhs = self.fadd(&self.fmul(&self.fsqr(x), x), x);
        self.fsqr(y) == rhs
    }

    fn to_jacobian(&self, p: &G1) -> Jacobian {
        match &p.0 {
            None => Jacobian { x: BigUint::one(), y: BigUint::one(), z: BigUint::zero() },
            Some((x, y)) => Jacobian { x: x.clone(), y: y.clone(), z: BigUint::one() },
        }
    }

    fn to_affine(&self, j: &Jacobian) -> G1 {
        if j.z.is_zero() {
            return G1::identity();
        }
        let zinv = self.finv(&j.z).expect("non-zero field element is invertible");
        let zinv2 = self.fsqr(&zinv);
        let zinv3 = self.fmul(&zinv2, &zinv);
        G1::from_affine(self.fmul(&j.x, &zinv2), self.fmul(&j.y, &zinv3))
    }

    fn jac_double(&self, t: &Jacobian) -> Jacobian {
        if t.z.is_zero() || t.y.is_zero() {
            return Jacobian { x: BigUint::one(), y: BigUint::one(), z: BigUint::zero() };
        }
        let xx = self.fsqr(&t.x);
        let yy = self.fsqr(&t.y);
        let yyyy = self.fsqr(&yy);
        let zz = self.fsqr(&t.z);
        let s = self.fsmall(&self.fmul(&t.x, &yy), 4);
        // a = 1
        let m = self.fadd(&self.fsmall(&xx, 3), &self.fsqr(&zz));
        let x3 = self.fsub(&self.fsqr(&m), &self.fadd(&s, &s));
        let y3 = self.fsub(&self.fmul(&m, &self.fsub(&s, &x3)), &self.fsmall(&yyyy, 8));
        let z3 = self.fsmall(&self.fmul(&t.y, &t.z), 2);
        Jacobian { x: x3, y: y3, z: z3 }
    }

    fn jac_add_affine(&self, t: &Jacobian, px: &BigUint, py: &BigUint) -> Jacobian {
        if t.z.is_zero() {
            return Jacobian { x: px.clone(), y: py.clone(), z: BigUint::one() };
        }
        let z1z1 = self.fsqr(&t.z);
        let u2 = self.fmul(px, &z1z1);
        let s2 = self.fmul(py, &self.fmul(&t.z, &z1z1));
        let h = self.fsub(&u2, &t.x);
        let r = self.fsub(&s2, &t.y);
        if h.is_zero() {
            if r.is_zero() {
                return self.jac_double(t);
            }
            return Jacobian { x: BigUint::one(), y: BigUint::one(), z: BigUint::zero() };
        }
        let hh = self.fsqr(&h);
        let hhh = self.fmul(&h, &hh);
        let v = self.fmul(&t.x, &hh);
        let x3 = self.fsub(&self.fsub(&self.fsqr(&r), &hhh), &self.fadd(&v, &v));
        let y3 = self.fsub(&self.fmul(&r, &self.fsub(&v, &x3)), &self.fmul(&t.y, &hhh));
        let z3 = self.fmul(&t.z, &h);
        Jacobian { x: x3, y: y3, z: z3 }
    }

    fn mul_big(&self, p: &G1, k: &BigUint) -> G1 {
        let Some((px, py)) = &p.0 else {
            return G1::identity();
        };
        let mut acc = Jacobian { x: BigUint::one(), y: BigUint::one(), z: BigUint::zero() };
        for i in (0..k.bits()).rev() {
            acc = self.jac_double(&acc);
            if k.bit(i) {
                acc = self.jac_add_affine(&acc, px, py);
            }
        }
        self.to_affine(&acc)
    }

    /// `k * P`, written multiplicatively as `P^k` elsewhere in the crate.
    pub fn mul(&self, p: &G1, k: &Scalar) -> G1 {
        self.mul_big(p, &k.0)
    }

    /// Group law on affine points.
    pub fn add(&self, a: &G1, b: &G1) -> G1 {
        match &b.0 {
            None => a.clone(),
            Some((bx, by)) => {
                let j = self.jac_add_affine(&self.to_jacobian(a), bx, by);
                self.to_affine(&j)
            }
        }
    }

    pub fn neg(&self, a: &G1) -> G1 {
        match &a.0 {
            None => G1::identity(),
            Some((x, y)) => G1::from_affine(x.clone(), self.fneg(y)),
        }
    }

    /// True iff `p` lies on the curve and in the order-`q` subgroup.
    pub fn g1_is_member(&self, p: &G1) -> bool {
        match &p.0 {
            None => true,
            Some((x, y)) => self.on_curve(x, y) && self.mul_big(p, &self.q).is_identity(),
        }
    }

    /// Samples a uniformly random point of `E(F_p)` and clears the cofactor.
    pub fn random_g1<R: RngCore + CryptoRng>(&self, rng: &mut R) -> G1 {
        let exp_sqrt = (&self.p + 1u32) >> 2;
        let exp_legendre = (&self.p - 1u32) >> 1;
        loop {
            let x = rng.gen_biguint_below(&self.p);
            let rhs = self.fadd(&self.fmul(&self.fsqr(&x), &x), &x);
            if rhs.is_zero() || rhs.modpow(&exp_legendre, &self.p) != BigUint::one() {
                continue;
            }
            let y = rhs.modpow(&exp_sqrt, &self.p);
            let point = self.mul_big(&G1::from_affine(x, y), &self.cofactor);
            if !point.is_identity() {
                return point;
            }
        }
    }

    // --- pairing -------------------------------------------------------------

    /// Reduced Tate pairing `e(P, psi(Q))`.
    pub fn pairing(&self, p: &G1, q: &G1) -> Gt {
        let (Some((px, py)), Some((qx, qy))) = (&p.0, &q.0) else {
            return Gt::one();
        };
        let f = self.miller_loop(px, py, qx, qy);
        self.final_exponentiation(&f)
    }

    fn miller_loop(&self, px: &BigUint, py: &BigUint, qx: &BigUint, qy: &BigUint) -> Gt {
        let mut f = Gt::one();
        let mut t = Jacobian { x: px.clone(), y: py.clone(), z: BigUint::one() };
        let bits = self.q.bits();
        for i in (0..bits - 1).rev() {
            // tangent at T, scaled by 2*Y*Z^3 (an F_p factor killed by the final exponentiation)
            if !t.z.is_zero() && !t.y.is_zero() {
                let zz = self.fsqr(&t.z);
                let m = self.fadd(&self.fsmall(&self.fsqr(&t.x), 3), &self.fsqr(&zz));
                let re =
                    self.fsub(&self.fmul(&m, &self.fadd(&self.fmul(qx, &zz), &t.x)), &self.fsmall(&self.fsqr(&t.y), 2));
                let yz = self.fmul(&t.y, &t.z);
                let im = self.fmul(&self.fsmall(&self.fmul(&yz, &zz), 2), qy);
                f = self.gt_mul_raw(&self.gt_sqr_raw(&f), &Gt { re, im });
            } else {
                f = self.gt_sqr_raw(&f);
            }
            t = self.jac_double(&t);

            if self.q.bit(i) && !t.z.is_zero() {
                let zz = self.fsqr(&t.z);
                let h = self.fsub(&self.fmul(px, &zz), &t.x);
                let r = self.fsub(&self.fmul(py, &self.fmul(&t.z, &zz)), &t.y);
                if !h.is_zero() {
                    let z3 = self.fmul(&t.z, &h);
                    let re = self.fsub(&self.fmul(&r, &self.fadd(qx, px)), &self.fmul(py, &z3));
                    let im = self.fmul(qy, &z3);
                    f = self.gt_mul_raw(&f, &Gt { re, im });
                }
                // h == 0 means T = -P: the vertical line lies in F_p and is dropped
                t = self.jac_add_affine(&t, px, py);
            }
        }
        f
    }

    fn final_exponentiation(&self, f: &Gt) -> Gt {
        // f^(p-1) = conj(f) / f, then the hard part (p+1)/q
        let inv = self.gt_inv_raw(f).expect("Miller loop output is non-zero");
        let easy = self.gt_mul_raw(&self.gt_conj(f), &inv);
        self.gt_pow_raw(&easy, &self.final_exp)
    }

    // --- scalars -------------------------------------------------------------

    /// Uniform scalar in `[1, q - 1]`.
    pub fn random_nonzero_scalar<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Scalar {
        let upper = &self.q - 1u32;
        Scalar(rng.gen_biguint_below(&upper) + 1u32)
    }

    pub fn scalar_inv(&self, k: &Scalar) -> Option<Scalar> {
        let r = &k.0 % &self.q;
        if r.is_zero() {
            return None;
        }
        r.modinv(&self.q).map(Scalar)
    }

    pub fn scalar_mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 * &b.0) % &self.q)
    }

    pub fn reduce(&self, k: &BigUint) -> Scalar {
        Scalar(k.mod_floor(&self.q))
    }

    // --- encoding ------------------------------------------------------------

    fn put_coord(&self, out: &mut Vec<u8>, v: &BigUint, width: usize) {
        let bytes = v.to_bytes_be();
        out.extend(std::iter::repeat_n(0u8, width - bytes.len()));
        out.extend_from_slice(&bytes);
    }

    pub fn encode_g1(&self, p: &G1, width: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 * width);
        match &p.0 {
            None => out.resize(2 * width, 0),
            Some((x, y)) => {
                self.put_coord(&mut out, x, width);
                self.put_coord(&mut out, y, width);
            }
        }
        out
    }

    pub fn decode_g1(&self, bytes: &[u8], width: usize) -> Result<G1, CryptoError> {
        if bytes.len() != 2 * width {
            return Err(CryptoError::Decode(format!("G1 element must be {} bytes, got {}", 2 * width, bytes.len())));
        }
        if bytes.iter().all(|b| *b == 0) {
            return Ok(G1::identity());
        }
        let x = BigUint::from_bytes_be(&bytes[..width]);
        let y = BigUint::from_bytes_be(&bytes[width..]);
        let point = G1::from_affine(x, y);
        if !self.g1_is_member(&point) {
            return Err(CryptoError::Decode("point is not in G1".into()));
        }
        Ok(point)
    }

    pub fn encode_gt(&self, a: &Gt, width: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 * width);
        self.put_coord(&mut out, &a.re, width);
        self.put_coord(&mut out, &a.im, width);
        out
    }

    pub fn decode_gt(&self, bytes: &[u8], width: usize) -> Result<Gt, CryptoError> {
        if bytes.len() != 2 * width {
            return Err(CryptoError::Decode(format!("GT element must be {} bytes, got {}", 2 * width, bytes.len())));
        }
        let a = Gt { re: BigUint::from_bytes_be(&bytes[..width]), im: BigUint::from_bytes_be(&bytes[width..]) };
        if !self.gt_is_member(&a) {
            return Err(CryptoError::Decode("element is not in GT".into()));
        }
        Ok(a)
    }
}
