import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avibench.eval.io import SubmissionFormatError, format_submission, load_submission, parse_submission, \
    write_submission
from avibench.eval.metrics import SubmissionSet


def test_parse_basic():
    sub = parse_submission("itemid,prediction\na,0.25\nb,1\n\n", team="t")
    assert sub.predictions == {"a": 0.25, "b": 1.0}
    assert sub.team == "t"


def test_header_case_and_spaces():
    assert parse_submission(" ItemID , Prediction \nx, 0.5\n").predictions == {"x": 0.5}


@pytest.mark.parametrize("text", ["", "id,score\na,0.1\n", "prediction,itemid\na,0.1\n"])
def test_bad_header(text):
    with pytest.raises(SubmissionFormatError):
        parse_submission(text)


def test_bad_rows_cite_line_numbers():
    with pytest.raises(SubmissionFormatError) as exc:
        parse_submission("itemid,prediction\na,0.1\nb,1.5\nc,nan\nd,x\ne\n")
    offenders = exc.value.offenders
    assert offenders[0].startswith("line 3: b=")
    assert any(o.startswith("line 4") for o in offenders)
    assert any(o.startswith("line 5") for o in offenders)
    assert any(o.startswith("line 6") for o in offenders)


def test_duplicates_rejected():
    with pytest.raises(SubmissionFormatError) as exc:
        parse_submission("itemid,prediction\na,0.1\na,0.2\n")
    assert exc.value.offenders == ["a"]


def test_offenders_capped_at_ten():
    rows = "".join(f"i{k},2\n" for k in range(30))
    with pytest.raises(SubmissionFormatError) as exc:
        parse_submission("itemid,prediction\n" + rows)
    assert len(exc.value.offenders) == 10
    assert "30 invalid rows" in str(exc.value)


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(st.from_regex(r"[a-z][a-z0-9_]{0,8}", fullmatch=True),
                       st.floats(0.0, 1.0, allow_nan=False), min_size=1, max_size=30))
def test_roundtrip(preds):
    sub = SubmissionSet(preds)
    assert parse_submission(format_submission(sub)).predictions == sub.predictions


def test_file_roundtrip(tmp_path):
    sub = SubmissionSet({"a": 0.1, "b": 0.9})
    p = write_submission(sub, tmp_path / "sub" / "team-x.csv")
    loaded = load_submission(p)
    assert loaded.predictions == sub.predictions
    assert loaded.team == "team-x"
