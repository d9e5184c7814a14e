import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tpdm import instrument
from tpdm import pairing as pg

scalars = st.integers(min_value=1, max_value=pg.ORDER_Q - 1)
g1, g2 = pg.SUITE.g1, pg.SUITE.g2


@given(scalars, scalars)
def test_bilinear(a, b):
    lhs = pg.pair(pg.g1_mul(g1, a), pg.g2_mul(g2, b))
    assert lhs == pg.gt_pow(pg.pair(g1, g2), a * b)


def test_pairing_non_degenerate():
    assert pg.pair(g1, g2) != pg.gt_one()


@given(st.integers(min_value=0, max_value=40))
def test_g1_mul_matches_repeated_addition(k):
    acc = pg.g1_identity()
    for _ in range(k):
        acc = acc + g1
    assert pg.g1_mul(g1, k) == acc


def test_g1_mul_reduces_mod_q():
    assert pg.g1_mul(g1, pg.ORDER_Q + 5) == pg.g1_mul(g1, 5)
    assert pg.g1_mul(g1, -1) + g1 == pg.g1_identity()
    assert pg.g1_mul(g1, pg.ORDER_Q) == pg.g1_identity()


@given(st.lists(scalars, min_size=0, max_size=12))
def test_multiexp_equals_product_of_powers(ks):
    rng = random.Random(len(ks))
    pts = [pg.hash_to_g1(rng.randbytes(8)) for _ in ks]
    with instrument.track() as c:
        got = pg.g1_multiexp(pts, ks)
    assert got == pg.g1_sum(pg.g1_mul(P, k) for P, k in zip(pts, ks))
    assert c[instrument.G1_EXP] == len(ks)


@given(scalars)
def test_encodings_round_trip(k):
    P, Q = pg.g1_mul(g1, k), pg.g2_mul(g2, k)
    assert len(pg.encode_g1(P)) == pg.G1_BYTES
    assert pg.decode_g1(pg.encode_g1(P)) == P
    assert pg.decode_g2(pg.encode_g2(Q)) == Q
    assert pg.decode_scalar(pg.encode_scalar(k)) == k


def test_identity_encodes():
    assert pg.decode_g1(pg.encode_g1(pg.g1_identity())) == pg.g1_identity()


def test_decoding_rejects_bad_input():
    with pytest.raises(pg.InvalidElement):
        pg.decode_g1(b"\x00" * 47)
    with pytest.raises(pg.InvalidElement):
        pg.decode_g1(b"\xff" * 48)
    with pytest.raises(pg.InvalidElement):
        pg.decode_g2(b"\x01" * 96)
    with pytest.raises(pg.InvalidElement):
        pg.decode_scalar(pg.ORDER_Q.to_bytes(32, "big"))


@given(st.binary(max_size=64))
def test_hash_to_g1_deterministic_and_in_subgroup(data):
    P = pg.hash_to_g1(data)
    assert P == pg.hash_to_g1(data)
    assert P != pg.g1_identity()
    # the checked decoder enforces subgroup membership
    assert pg.decode_g1(pg.encode_g1(P)) == P


def test_hash_to_g1_separates_inputs():
    pts = {pg.encode_g1(pg.hash_to_g1(i.to_bytes(4, "big"))) for i in range(200)}
    assert len(pts) == 200


def test_hash_to_scalar():
    assert 0 <= pg.hash_to_scalar(b"x") < pg.ORDER_Q
    assert pg.hash_to_scalar(b"x", "sha1") < 2**160
    assert pg.hash_to_scalar(b"x") != pg.hash_to_scalar(b"y")
    with pytest.raises(ValueError):
        pg.hash_to_scalar(b"x", "md5")


def test_mask_is_deterministic_digest():
    P = pg.g1_mul(g1, 7)
    assert pg.mask(P) == pg.mask(pg.g1_mul(g1, 7))
    assert len(pg.mask(P)) == 32
    assert pg.mask(P) != pg.mask(g1)


def test_pairing_counter():
    with instrument.track() as c:
        pg.pair(g1, g2)
        pg.pair(g1, g2)
    assert c[instrument.PAIRING] == 2


def test_suite_description():
    d = pg.SUITE.describe()
    assert d["name"] == "BLS12-381"
    assert int(d["q"], 16) == pg.ORDER_Q
