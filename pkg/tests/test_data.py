"""Corpus file formats, the multilingual filter, and the synthetic generator."""

import random

import numpy as np
import pytest

from imglex.data import (
    SyntheticSpec,
    TripleRecord,
    filter_multilingual,
    gen_synthetic,
    generate_synthetic,
    load_features,
    load_triples,
    prepare_examples,
    save_triples,
)
from imglex.errors import DataError
from imglex.textproc import LangMode, build_vocab


def triple(weight, lang, query, image_id):
    return TripleRecord(weight=weight, lang=lang, query=query, image_id=image_id)


def test_load_triples_basic(tmp_path):
    path = tmp_path / "triples.tsv"
    path.write_text("1.0\ten\tback pain\timg42\n0.5\tde\tkatze\timg7\n", encoding="utf-8")
    records = load_triples(path)
    assert records[0] == triple(1.0, "en", "back pain", "img42")
    assert records[1].weight == 0.5


def test_load_triples_wrong_column_count(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("1.0\ten\tno image column\n", encoding="utf-8")
    with pytest.raises(DataError, match=r"bad\.tsv:1"):
        load_triples(path)


def test_load_triples_negative_weight(tmp_path):
    path = tmp_path / "neg.tsv"
    path.write_text("-1\ten\tq\timg\n", encoding="utf-8")
    with pytest.raises(DataError, match="negative weight"):
        load_triples(path)


def test_load_triples_non_numeric_weight(tmp_path):
    path = tmp_path / "nan.tsv"
    path.write_text("ok\ten\tq\timg\n", encoding="utf-8")
    with pytest.raises(DataError, match="non-numeric weight"):
        load_triples(path)


def test_load_triples_missing_file(tmp_path):
    with pytest.raises(DataError, match="cannot read"):
        load_triples(tmp_path / "nope.tsv")


def test_triples_round_trip(tmp_path):
    records = [triple(1.0, "en", "a b", "i1"), triple(0.25, "fr", "c", "i2")]
    path = tmp_path / "t.tsv"
    save_triples(path, records)
    assert load_triples(path) == records


def test_load_features_basic(tmp_path):
    path = tmp_path / "f.tsv"
    path.write_text("img1\t0.1,0.2\nimg2\t0.3,0.4\n", encoding="utf-8")
    feats = load_features(path)
    assert set(feats) == {"img1", "img2"}
    assert np.allclose(feats["img1"], [0.1, 0.2])


def test_load_features_dimension_mismatch(tmp_path):
    path = tmp_path / "f.tsv"
    path.write_text("img1\t0.1,0.2\nimg2\t0.3,0.4,0.5\n", encoding="utf-8")
    with pytest.raises(DataError, match="feature length"):
        load_features(path)


def test_load_features_duplicate_id(tmp_path):
    path = tmp_path / "f.tsv"
    path.write_text("img1\t0.1,0.2\nimg1\t0.3,0.4\n", encoding="utf-8")
    with pytest.raises(DataError, match="duplicate image id"):
        load_features(path)


def test_filter_multilingual_forced_example():
    triples = [
        triple(1, "en", "q1", "imgA"),
        triple(1, "de", "q2", "imgA"),
        triple(1, "en", "q3", "imgB"),
        triple(1, "en", "q4", "imgA"),
    ]
    kept = filter_multilingual(triples)
    assert [t.image_id for t in kept] == ["imgA", "imgA", "imgA"]
    assert kept == [triples[0], triples[1], triples[3]]  # stable order


def test_filter_multilingual_empty():
    assert filter_multilingual([]) == []


def test_filter_multilingual_hand_enumerated_corpus():
    langs = ["en", "en", "de", "fr", "en", "de", "en", "fr", "de", "en"]
    images = ["i1", "i2", "i1", "i3", "i2", "i2", "i3", "i1", "i3", "i1"]
    triples = [triple(1, langs[k], f"q{k}", images[k]) for k in range(10)]
    # By hand: i1 has {en, de, fr}; i2 has {en, de}; i3 has {fr, en, de}.
    assert filter_multilingual(triples) == triples


def test_filter_multilingual_matches_bruteforce_and_idempotent():
    rng = random.Random(0)
    for _ in range(30):
        n = rng.randrange(0, 120)
        triples = [
            triple(1, rng.choice(["en", "de", "fr"]), f"q{k}", f"i{rng.randrange(12)}")
            for k in range(n)
        ]
        kept = filter_multilingual(triples)
        brute = [
            t
            for t in triples
            if len({u.lang for u in triples if u.image_id == t.image_id}) >= 2
        ]
        assert kept == brute
        assert filter_multilingual(kept) == kept


def small_spec(**overrides):
    defaults = dict(
        num_concepts=3,
        num_languages=2,
        words_per_concept=2,
        feature_dim=6,
        noise_sigma=0.1,
        num_examples=40,
        seed=11,
        images_per_concept=4,
        isolated_image_fraction=0.25,
    )
    defaults.update(overrides)
    return SyntheticSpec(**defaults)


def test_gen_synthetic_zero_sigma_identical_features():
    corpus = generate_synthetic(small_spec(noise_sigma=0.0))
    by_concept = {}
    for image_id, vec in corpus.features.items():
        if image_id.startswith("c"):  # pool image id: c<concept>i<slot>
            by_concept.setdefault(image_id[1:].split("i")[0], []).append(vec)
    assert len(by_concept) == 3
    for vecs in by_concept.values():
        for v in vecs[1:]:
            assert np.array_equal(v, vecs[0])


def test_gen_synthetic_counting():
    corpus = generate_synthetic(small_spec(num_concepts=2, num_languages=2, words_per_concept=1, num_examples=4))
    assert len(corpus.triples) == 4
    words = {w for w1, w2, _ in corpus.lexicon for w in (w1.split(":", 1)[1], w2.split(":", 1)[1])}
    assert len(words) == 4  # 2 concepts x 2 languages x 1 word


def test_gen_synthetic_deterministic(tmp_path):
    a = gen_synthetic(small_spec(), tmp_path / "a")
    b = gen_synthetic(small_spec(), tmp_path / "b")
    for pa, pb in [(a.triples, b.triples), (a.features, b.features), (a.lexicon, b.lexicon)]:
        assert pa.read_bytes() == pb.read_bytes()


def test_gen_synthetic_lexicon_is_crosslingual_same_concept():
    corpus = generate_synthetic(small_spec())
    assert corpus.lexicon
    for w1, w2, concept in corpus.lexicon:
        lang1, word1 = w1.split(":", 1)
        lang2, word2 = w2.split(":", 1)
        assert lang1 != lang2
        # Synthetic words embed their concept: l<lang>w<concept>k<slot>.
        assert word1.split("w")[1].split("k")[0] == str(concept)
        assert word2.split("w")[1].split("k")[0] == str(concept)


def test_gen_synthetic_features_are_normalized_and_cover_all_images():
    corpus = generate_synthetic(small_spec())
    referenced = {t.image_id for t in corpus.triples}
    assert referenced <= set(corpus.features)
    for vec in corpus.features.values():
        assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-9)


def prepared_fixture(tower, triples=None, features=None):
    triples = triples or [
        triple(1.0, "en", "back pain", "img42"),
        triple(0.5, "en", "???", "img42"),
        triple(2.0, "de", "katze", "img7"),
    ]
    stream = ["en:back"] * 6 + ["en:pain"] * 6 + ["de:katze"] * 6
    vocab = build_vocab(stream, min_count=6, num_buckets=10, mode=LangMode.AWARE)
    return prepare_examples(triples, vocab, tower=tower, features=features), vocab


def test_prepare_examples_mlp():
    features = {"img42": np.array([0.1, 0.2]), "img7": np.array([0.3, 0.4])}
    prep, vocab = prepared_fixture("mlp", features=features)
    assert prep.dropped == 1  # "???" tokenizes to nothing
    assert len(prep.examples) == 2
    first = prep.examples[0]
    assert list(first.token_ids) == [vocab.index["en:back"], vocab.index["en:pain"]]
    assert np.array_equal(first.image, features["img42"])
    assert first.weight == 1.0
    assert prep.feature_dim == 2


def test_prepare_examples_missing_feature_named():
    features = {"img42": np.array([0.1, 0.2])}
    with pytest.raises(DataError, match="img7"):
        prepared_fixture("mlp", features=features)


def test_prepare_examples_lookup_dense_reindex():
    triples = [
        triple(1.0, "en", "back pain", "a"),
        triple(1.0, "de", "katze", "b"),
        triple(1.0, "en", "pain", "a"),
    ]
    prep, _ = prepared_fixture("lookup", triples=triples)
    assert [ex.image for ex in prep.examples] == [0, 1, 0]
    assert prep.num_images == 2
    assert prep.image_ids == ["a", "b"]


def test_prepare_examples_hashes_oov_tokens():
    _, vocab = prepared_fixture("lookup")
    prep = prepare_examples([triple(1.0, "fr", "inconnu", "x")], vocab, tower="lookup")
    assert prep.examples[0].token_ids[0] >= vocab.vocab_size


def test_prepare_examples_preserves_order():
    triples = [triple(1.0, "en", f"back pain {k}", f"i{k}") for k in range(5)]
    prep, _ = prepared_fixture("lookup", triples=triples)
    assert [ex.image for ex in prep.examples] == [0, 1, 2, 3, 4]
