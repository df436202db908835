//! Public parameter generation for the pairing group.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::pairing::{Gt, PairingGroup, G1};
use super::CryptoError;
use crate::crypto::hash::hash_parts;

/// Default serialized size of one group element.
pub const DEFAULT_ELEMENT_SIZE: usize = 128;

const SMALL_PRIMES: [u32; 54] = [
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229, 233, 239,
    241, 251, 257,
];

/// Miller-Rabin with `rounds` random bases after trial division.
pub fn is_probable_prime<R: RngCore>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    if n == &two {
        return true;
    }
    if !n.bit(0) {
        return false;
    }
    for &sp in SMALL_PRIMES.iter() {
        let sp = BigUint::from(sp);
        if n == &sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn random_prime<R: RngCore>(bits: u64, rng: &mut R) -> BigUint {
    loop {
        let mut c = rng.gen_biguint(bits);
        c.set_bit(bits - 1, true);
        c.set_bit(0, true);
        if is_probable_prime(&c, 40, rng) {
            return c;
        }
    }
}

/// Curve sizes for a security level: (bits of q, bits of p).
fn sizes_for(lambda: u32) -> Result<(u64, u64), CryptoError> {
    match lambda {
        128 => Ok((160, 512)),
        256 => Ok((256, 1024)),
        other => Err(CryptoError::Config(format!("unsupported security parameter {other}"))),
    }
}

/// Group, generator and cached `e(g, g)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicParams {
    lambda: u32,
    group: PairingGroup,
    g: G1,
    egg: Gt,
    element_size: usize,
}

impl PublicParams {
    /// Deterministically generates parameters for `lambda` from `seed`.
    pub fn setup(lambda: u32, seed: u64) -> Result<Self, CryptoError> {
        let (qbits, pbits) = sizes_for(lambda)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let q = random_prime(qbits, &mut rng);
        let four_q = &q << 2;
        let hbits = pbits - qbits - 2;
        let p = loop {
            let mut h = rng.gen_biguint(hbits);
            h.set_bit(hbits - 1, true);
            let p: BigUint = &four_q * &h - 1u32;
            if p.bits() == pbits && is_probable_prime(&p, 40, &mut rng) {
                break p;
            }
        };
        let group = PairingGroup::new(p, q)?;
        let g = group.random_g1(&mut rng);
        Self::from_parts(lambda, group, g, DEFAULT_ELEMENT_SIZE)
    }

    /// Assembles parameters from an existing group and generator.
    pub fn from_parts(lambda: u32, group: PairingGroup, g: G1, element_size: usize) -> Result<Self, CryptoError> {
        if g.is_identity() || !group.g1_is_member(&g) {
            return Err(CryptoError::Config("generator is not a non-trivial G1 element".into()));
        }
        let egg = group.pairing(&g, &g);
        if egg.is_one() {
            return Err(CryptoError::Config("pairing is degenerate on the generator".into()));
        }
        let mut params = PublicParams { lambda, group, g, egg, element_size: 0 };
        params = params.with_element_size(element_size)?;
        Ok(params)
    }

    /// Overrides the serialized element width. Must be even and fit a field element pair.
    pub fn with_element_size(mut self, element_size: usize) -> Result<Self, CryptoError> {
        let natural = 2 * self.group.coord_len();
        if element_size == 0 || !element_size.is_multiple_of(2) || element_size < natural {
            return Err(CryptoError::Config(format!(
                "element size {element_size} must be even and at least {natural}"
            )));
        }
        self.element_size = element_size;
        Ok(self)
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn group(&self) -> &PairingGroup {
        &self.group
    }

    pub fn group_order_q(&self) -> &BigUint {
        self.group.order()
    }

    pub fn generator(&self) -> &G1 {
        &self.g
    }

    /// `e(g, g)`.
    pub fn gt_generator(&self) -> &Gt {
        &self.egg
    }

    pub fn element_size(&self) -> usize {
        self.element_size
    }

    fn coord_width(&self) -> usize {
        self.element_size / 2
    }

    pub fn encode_g1(&self, p: &G1) -> Vec<u8> {
        self.group.encode_g1(p, self.coord_width())
    }

    pub fn decode_g1(&self, bytes: &[u8]) -> Result<G1, CryptoError> {
        self.group.decode_g1(bytes, self.coord_width())
    }

    pub fn encode_gt(&self, a: &Gt) -> Vec<u8> {
        self.group.encode_gt(a, self.coord_width())
    }

    pub fn decode_gt(&self, bytes: &[u8]) -> Result<Gt, CryptoError> {
        self.group.decode_gt(bytes, self.coord_width())
    }

    /// Uniformly random element of `GT`.
    pub fn random_gt<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Gt {
        let e = self.group.random_nonzero_scalar(rng);
        self.group.gt_pow(&self.egg, &e)
    }

    /// Digest of `(lambda, p, q, g, element_size)`, used to pin parameters on chain.
    pub fn digest(&self) -> crate::crypto::Digest {
        let lambda = self.lambda.to_be_bytes();
        let size = (self.element_size as u64).to_be_bytes();
        let p = self.group.field_prime().to_bytes_be();
        let q = self.group.order().to_bytes_be();
        let g = self.encode_g1(&self.g);
        hash_parts(&[b"fairshare/params", &lambda, &size, &p, &q, &g])
    }
}
