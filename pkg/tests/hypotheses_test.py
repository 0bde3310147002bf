import pytest

from igelite.hypotheses import Hypotheses, Hypothesis, Provenance, Status

VERIFIED = Hypothesis("a", Status.VERIFIED, Provenance.EXACT)
ASSUMED = Hypothesis("b", Status.ASSUMED, Provenance.EXACT, "by construction")
FAILED = Hypothesis("c", Status.FAILED, Provenance.SAMPLED)


@pytest.mark.parametrize(("hypothesis", "holds"), [(VERIFIED, True), (ASSUMED, True), (FAILED, False)])
def test_holds(hypothesis: Hypothesis, holds: bool) -> None:
    assert hypothesis.holds == holds


def test_bundle_lookup() -> None:
    bundle = Hypotheses().add(VERIFIED).add(FAILED)
    assert len(bundle) == 2
    assert "a" in bundle
    assert "z" not in bundle
    assert bundle.get("c") is FAILED
    with pytest.raises(KeyError):
        bundle.get("z")


def test_add_replaces_by_name() -> None:
    replacement = Hypothesis("c", Status.VERIFIED, Provenance.CERTIFICATE)
    bundle = Hypotheses().add(FAILED).add(VERIFIED).add(replacement)
    assert [item.name for item in bundle] == ["a", "c"]
    assert bundle.get("c") is replacement
    assert bundle.all_hold


def test_add_leaves_the_original_untouched() -> None:
    bundle = Hypotheses().add(VERIFIED)
    bundle.add(FAILED)
    assert len(bundle) == 1


def test_merge_and_failed() -> None:
    bundle = Hypotheses().add(VERIFIED).merge(Hypotheses().add(ASSUMED).add(FAILED))
    assert [item.name for item in bundle] == ["a", "b", "c"]
    assert bundle.failed == (FAILED,)
    assert not bundle.all_hold
