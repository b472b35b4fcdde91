from tar_bench.rng import SplitMix64, derive_seed, fnv1a64, mix64


def test_stream_is_deterministic():
    a = SplitMix64(42)
    b = SplitMix64(42)
    assert [a.next_u64() for _ in range(100)] == [b.next_u64() for _ in range(100)]


def test_known_splitmix64_values():
    # Reference values for seed 0 from the published SplitMix64 algorithm.
    rng = SplitMix64(0)
    assert rng.next_u64() == 0xE220A8397B1DCDAF
    assert rng.next_u64() == 0x6E789E6AA1B965F4
    assert rng.next_u64() == 0x06C45D188009454F


def test_values_fit_in_64_bits():
    rng = SplitMix64(12345)
    for _ in range(1000):
        v = rng.next_u64()
        assert 0 <= v < 1 << 64


def test_bounded_range_and_coverage():
    rng = SplitMix64(7)
    draws = [rng.bounded(10) for _ in range(2000)]
    assert all(0 <= d < 10 for d in draws)
    assert set(draws) == set(range(10))


def test_random_unit_interval():
    rng = SplitMix64(3)
    xs = [rng.random() for _ in range(1000)]
    assert all(0.0 <= x < 1.0 for x in xs)
    assert 0.4 < sum(xs) / len(xs) < 0.6


def test_shuffle_is_a_permutation():
    rng = SplitMix64(11)
    items = list(range(50))
    shuffled = items.copy()
    rng.shuffle(shuffled)
    assert sorted(shuffled) == items
    assert shuffled != items


def test_derive_seed_depends_on_label_not_order():
    s1 = derive_seed(99, "dataset/t1/relevance/builtin-lr/na")
    s2 = derive_seed(99, "dataset/t2/relevance/builtin-lr/na")
    assert s1 != s2
    assert s1 == derive_seed(99, "dataset/t1/relevance/builtin-lr/na")


def test_mix64_and_fnv_are_pure():
    assert mix64(123) == mix64(123)
    assert fnv1a64(b"abc") == fnv1a64(b"abc")
    assert fnv1a64(b"abc") != fnv1a64(b"abd")
