"""ML-KEM-1024 key encapsulation (FIPS 203 parameter set, security category 5).

Self-contained implementation over the ring Z_q[X]/(X^256 + 1), q = 3329,
with module rank k = 4.  Polynomial arithmetic is vectorized with numpy; all
hashing uses the SHA-3/SHAKE family from hashlib.

Sizes for this parameter set:
    encapsulation key  1568 bytes
    decapsulation key  3168 bytes
    ciphertext         1568 bytes
    shared secret        32 bytes

Decapsulation applies implicit rejection: a ciphertext that fails the
re-encryption check yields a pseudorandom secret derived from the rejection
value, never an error, so invalid ciphertexts are indistinguishable from
valid ones at the API level (wrong-length inputs still raise).

Public API:
    keygen(seed)            -> (ek, dk)
    encaps(ek, randomness)  -> (ct, shared_secret)
    decaps(dk, ct)          -> shared_secret
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

Q = 3329
K = 4
ETA1 = 2
ETA2 = 2
DU = 11
DV = 5

EK_BYTES = 384 * K + 32     # 1568
DK_BYTES = 768 * K + 96     # 3168
CT_BYTES = 32 * (DU * K + DV)  # 1568
SS_BYTES = 32

_N_INV = 3303  # 128^-1 mod q


def _bitrev7(n: int) -> int:
    r = 0
    for _ in range(7):
        r = (r << 1) | (n & 1)
        n >>= 1
    return r


# zeta = 17 is a primitive 256th root of unity mod q; table in bit-reversed order.
_ZETAS = np.array([pow(17, _bitrev7(i), Q) for i in range(128)], dtype=np.int64)

# Base-case twiddles for pairwise multiplication: pair 2i uses +_ZETAS[64+i],
# pair 2i+1 uses its negation.
_GAMMAS = np.empty(128, dtype=np.int64)
_GAMMAS[0::2] = _ZETAS[64:]
_GAMMAS[1::2] = (Q - _ZETAS[64:]) % Q


def _sha3_256(data: bytes) -> bytes:
    return hashlib.sha3_256(data).digest()


def _sha3_512(data: bytes) -> bytes:
    return hashlib.sha3_512(data).digest()


def _shake256(data: bytes, length: int) -> bytes:
    return hashlib.shake_256(data).digest(length)


def _prf(eta: int, seed: bytes, counter: int) -> bytes:
    return _shake256(seed + bytes([counter]), 64 * eta)


# -- polynomial arithmetic (coefficients as int64 arrays, last axis 256) --


def ntt(f: np.ndarray) -> np.ndarray:
    """Forward number-theoretic transform, layer by layer."""
    a = np.array(f, dtype=np.int64, copy=True)
    lead = a.shape[:-1]
    k = 1
    length = 128
    while length >= 2:
        nb = 256 // (2 * length)
        blocks = a.reshape(*lead, nb, 2, length)
        z = _ZETAS[k : k + nb][:, None]
        t = (z * blocks[..., 1, :]) % Q
        hi = (blocks[..., 0, :] - t) % Q
        lo = (blocks[..., 0, :] + t) % Q
        blocks[..., 1, :] = hi
        blocks[..., 0, :] = lo
        k += nb
        length //= 2
    return a


def ntt_inv(fhat: np.ndarray) -> np.ndarray:
    """Inverse transform; consumes twiddles in descending order."""
    a = np.array(fhat, dtype=np.int64, copy=True)
    lead = a.shape[:-1]
    k = 127
    length = 2
    while length <= 128:
        nb = 256 // (2 * length)
        blocks = a.reshape(*lead, nb, 2, length)
        z = _ZETAS[k - nb + 1 : k + 1][::-1].copy()[:, None]
        lo = blocks[..., 0, :].copy()
        blocks[..., 0, :] = (lo + blocks[..., 1, :]) % Q
        blocks[..., 1, :] = (z * ((blocks[..., 1, :] - lo) % Q)) % Q
        k -= nb
        length *= 2
    return (a * _N_INV) % Q


def multiply_ntts(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Pointwise product in the NTT domain (128 degree-1 residue pairs)."""
    a0, a1 = f[..., 0::2], f[..., 1::2]
    b0, b1 = g[..., 0::2], g[..., 1::2]
    c0 = (a0 * b0 + ((a1 * b1) % Q) * _GAMMAS) % Q
    c1 = (a0 * b1 + a1 * b0) % Q
    out = np.empty(np.broadcast_shapes(f.shape, g.shape), dtype=np.int64)
    out[..., 0::2] = c0
    out[..., 1::2] = c1
    return out


# -- sampling --


def _sample_uniform(seed34: bytes) -> np.ndarray:
    """Rejection-sample one NTT-domain polynomial from SHAKE-128 output."""
    need = 768  # 512 candidate 12-bit values; ~416 survive rejection on average
    while True:
        buf = np.frombuffer(hashlib.shake_128(seed34).digest(need), dtype=np.uint8)
        buf = buf.astype(np.int64).reshape(-1, 3)
        cand = np.empty(2 * buf.shape[0], dtype=np.int64)
        cand[0::2] = buf[:, 0] | ((buf[:, 1] & 0x0F) << 8)
        cand[1::2] = (buf[:, 1] >> 4) | (buf[:, 2] << 4)
        accepted = cand[cand < Q]
        if accepted.size >= 256:
            return accepted[:256]
        need *= 2  # vanishingly unlikely; SHAKE extension keeps the prefix


def _gen_matrix(rho: bytes) -> np.ndarray:
    """Public matrix A with A[i][j] sampled from XOF(rho || j || i)."""
    a = np.empty((K, K, 256), dtype=np.int64)
    for i in range(K):
        for j in range(K):
            a[i, j] = _sample_uniform(rho + bytes([j, i]))
    return a


def _sample_cbd(data: bytes, eta: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    groups = bits.reshape(256, 2, eta).astype(np.int64).sum(axis=-1)
    return (groups[:, 0] - groups[:, 1]) % Q


def _cbd_vector(seed: bytes, eta: int, first_counter: int) -> np.ndarray:
    return np.stack(
        [_sample_cbd(_prf(eta, seed, first_counter + i), eta) for i in range(K)]
    )


# -- serialization --


def _byte_encode(coeffs: np.ndarray, d: int) -> bytes:
    """Pack d-bit coefficients little-endian, 256 per polynomial."""
    vals = np.asarray(coeffs, dtype=np.int64)
    bits = ((vals[..., None] >> np.arange(d)) & 1).astype(np.uint8)
    flat = bits.reshape(*vals.shape[:-1], 256 * d)
    return np.packbits(flat, axis=-1, bitorder="little").tobytes()


def _byte_decode(data: bytes, d: int, count: int = 1) -> np.ndarray:
    raw = np.frombuffer(data, dtype=np.uint8)
    bits = np.unpackbits(raw, bitorder="little")[: count * 256 * d]
    bits = bits.reshape(count, 256, d).astype(np.int64)
    return (bits << np.arange(d)).sum(axis=-1)


def _compress(x: np.ndarray, d: int) -> np.ndarray:
    # round(2^d * x / q) mod 2^d, ties away from zero handled as round-half-up
    return ((np.asarray(x, dtype=np.int64) * (2 << d) + Q) // (2 * Q)) % (1 << d)


def _decompress(y: np.ndarray, d: int) -> np.ndarray:
    return (np.asarray(y, dtype=np.int64) * Q + (1 << (d - 1))) >> d


# -- K-PKE internal scheme --


def _kpke_keygen(d32: bytes) -> tuple[bytes, bytes]:
    rho_sigma = _sha3_512(d32 + bytes([K]))
    rho, sigma = rho_sigma[:32], rho_sigma[32:]
    a_hat = _gen_matrix(rho)
    s_hat = ntt(_cbd_vector(sigma, ETA1, 0))
    e_hat = ntt(_cbd_vector(sigma, ETA1, K))
    t_hat = (multiply_ntts(a_hat, s_hat[None, :, :]).sum(axis=1) + e_hat) % Q
    ek = _byte_encode(t_hat, 12) + rho
    dk = _byte_encode(s_hat, 12)
    return ek, dk


def _kpke_encrypt(ek: bytes, msg: bytes, r32: bytes) -> bytes:
    t_hat = _byte_decode(ek[: 384 * K], 12, K)
    rho = ek[384 * K :]
    a_hat = _gen_matrix(rho)
    y_hat = ntt(_cbd_vector(r32, ETA1, 0))
    e1 = _cbd_vector(r32, ETA2, K)
    e2 = _sample_cbd(_prf(ETA2, r32, 2 * K), ETA2)
    # u = invNTT(A^T y) + e1 ; transpose realized by swapping matrix axes
    u = (ntt_inv(multiply_ntts(a_hat.transpose(1, 0, 2), y_hat[None, :, :]).sum(axis=1)) + e1) % Q
    mu = _decompress(_byte_decode(msg, 1)[0], 1)
    v = (ntt_inv(multiply_ntts(t_hat, y_hat).sum(axis=0)) + e2 + mu) % Q
    c1 = _byte_encode(_compress(u, DU), DU)
    c2 = _byte_encode(_compress(v, DV), DV)
    return c1 + c2


def _kpke_decrypt(dk: bytes, ct: bytes) -> bytes:
    split = 32 * DU * K
    u = _decompress(_byte_decode(ct[:split], DU, K), DU)
    v = _decompress(_byte_decode(ct[split:], DV, 1)[0], DV)
    s_hat = _byte_decode(dk, 12, K)
    w = (v - ntt_inv(multiply_ntts(s_hat, ntt(u)).sum(axis=0))) % Q
    return _byte_encode(_compress(w, 1), 1)


# -- checked public API --


def _check_ek(ek: bytes) -> None:
    if len(ek) != EK_BYTES:
        raise ValueError(f"encapsulation key must be {EK_BYTES} bytes, got {len(ek)}")
    t_part = ek[: 384 * K]
    # modulus check: every 12-bit coefficient must already be reduced mod q
    if _byte_encode(_byte_decode(t_part, 12, K) % Q, 12) != t_part:
        raise ValueError("encapsulation key failed modulus check")


def expand_seed(seed) -> bytes:
    """Accept 64 raw bytes or an int; ints expand through SHAKE-256."""
    if seed is None:
        return os.urandom(64)
    if isinstance(seed, int):
        return _shake256(b"mlkem-seed" + seed.to_bytes(16, "little", signed=True), 64)
    if isinstance(seed, bytes) and len(seed) == 64:
        return seed
    raise ValueError("seed must be None, an int, or 64 bytes")


def keygen(seed=None) -> tuple[bytes, bytes]:
    """Generate an (ek, dk) pair; deterministic for a given seed."""
    material = expand_seed(seed)
    d, z = material[:32], material[32:]
    ek, dk_pke = _kpke_keygen(d)
    dk = dk_pke + ek + _sha3_256(ek) + z
    return ek, dk


def encaps(ek: bytes, randomness: bytes | None = None) -> tuple[bytes, bytes]:
    """Encapsulate a fresh 32-byte shared secret to ``ek``."""
    _check_ek(ek)
    m = os.urandom(32) if randomness is None else randomness
    if len(m) != 32:
        raise ValueError(f"encapsulation randomness must be 32 bytes, got {len(m)}")
    g = _sha3_512(m + _sha3_256(ek))
    shared, r = g[:32], g[32:]
    ct = _kpke_encrypt(ek, m, r)
    return ct, shared


def decaps(dk: bytes, ct: bytes) -> bytes:
    """Recover the shared secret; implicit rejection on invalid ciphertexts."""
    if len(ct) != CT_BYTES:
        raise ValueError(f"ciphertext must be {CT_BYTES} bytes, got {len(ct)}")
    if len(dk) != DK_BYTES:
        raise ValueError(f"decapsulation key must be {DK_BYTES} bytes, got {len(dk)}")
    dk_pke = dk[: 384 * K]
    ek = dk[384 * K : 768 * K + 32]
    h = dk[768 * K + 32 : 768 * K + 64]
    z = dk[768 * K + 64 :]
    m_cand = _kpke_decrypt(dk_pke, ct)
    g = _sha3_512(m_cand + h)
    k_cand, r_cand = g[:32], g[32:]
    k_reject = _shake256(z + ct, 32)
    ct_cand = _kpke_encrypt(ek, m_cand, r_cand)
    return k_cand if ct_cand == ct else k_reject
