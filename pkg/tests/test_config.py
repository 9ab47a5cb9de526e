import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msoksq.config import ExperimentConfig, emit, parse_config, parse_seeds, parse_text, trainer_defaults
from msoksq.errors import ConfigurationError
from msoksq.trainer import TrainerConfig


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("")
    cfg = parse_config(p)
    tc = cfg.trainer_config(0)
    assert (tc.eta1, tc.eta_p, tc.eta_w, tc.lambda1, tc.rho) == (0.1, 0.1, 0.5, 0.1, 1.0)
    assert cfg.seeds == [0] and cfg.preset is None


def test_full_schema():
    cfg = parse_text("""
        # comment line
        seeds = 0-4
        trainer.M = 6          # trailing comment
        trainer.M_prime = 3
        trainer.tau = none
        trainer.strict_eq39 = yes
        stream.source = synthetic
        stream.c1 = 0.25
        output.dir = out
        output.svg = true
        output.workers = 2
    """)
    assert cfg.seeds == [0, 1, 2, 3, 4]
    assert cfg.trainer == {"M": 6, "M_prime": 3, "tau": None, "strict_eq39": True}
    assert cfg.stream == {"source": "synthetic", "c1": 0.25}
    assert (cfg.out, cfg.svg, cfg.workers) == ("out", True, 2)


def test_preset_conflicts_with_structure():
    with pytest.raises(ConfigurationError, match="fixes M"):
        parse_text("preset = fig4\ntrainer.M = 3\n")
    with pytest.raises(ConfigurationError, match="stream.source"):
        parse_text("preset = fig7\nstream.source = synthetic\n")
    cfg = parse_text("preset = fig4\ntrainer.N = 50\n")
    assert cfg.trainer == {"N": 50}


@pytest.mark.parametrize("text,where", [
    ("trainer.bogus = 1\n", "line 1"),
    ("\n\nM = 3\n", "line 3"),
    ("trainer.M = three\n", "line 1"),
    ("trainer.M = 3\ntrainer.M = 4\n", "line 2"),
    ("output.svg = maybe\n", "line 1"),
    ("just text\n", "line 1"),
    ("stream.colour = red\n", "line 1"),
    ("output.where = x\n", "line 1"),
])
def test_errors_carry_line_numbers(text, where):
    with pytest.raises(ConfigurationError, match=where):
        parse_text(text)


@pytest.mark.parametrize("text", ["preset = fig99\n", "trainer.M = 3\ntrainer.M_prime = 4\n",
                                  "output.workers = 0\n", "trainer.seed = 3\n", "trainer.variant = best\n"])
def test_validation_errors(text):
    with pytest.raises(ConfigurationError):
        parse_text(text)


def test_parse_seeds():
    assert parse_seeds("0-3") == [0, 1, 2, 3]
    assert parse_seeds("1,5,7") == [1, 5, 7]
    assert parse_seeds("4") == [4]
    assert parse_seeds("4,") == [4]
    with pytest.raises(ConfigurationError):
        parse_seeds("a-b")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        parse_config(tmp_path / "none.cfg")


def test_round_trip_preset():
    cfg = parse_text("preset = fig5\nseeds = 3\ntrainer.N = 100\nstream.c1 = 0.5\n")
    assert parse_text(emit(cfg)) == cfg


trainer_values = st.fixed_dictionaries({}, optional={
    "eta1": st.floats(0.01, 0.5),
    "lambda1": st.floats(0.01, 1.0),
    "rho": st.floats(0.1, 5.0),
    "N": st.integers(1, 1000),
    "bits": st.integers(1, 3),
    "tau": st.one_of(st.none(), st.floats(0.01, 4.0)),
    "variant": st.sampled_from(["full", "no_w", "norma"]),
    "predict_with_indicator": st.booleans(),
    "w_zero_tol": st.floats(0.0, 0.5),
})


@settings(max_examples=60, deadline=None)
@given(trainer_values, st.lists(st.integers(0, 99), min_size=1, max_size=5, unique=True), st.booleans())
def test_round_trip_random(trainer, seeds, svg):
    cfg = ExperimentConfig(trainer=trainer, seeds=seeds, svg=svg, stream={"c1": 0.3}).validate()
    assert parse_text(emit(cfg)) == cfg


def test_trainer_defaults_match_dataclass():
    d = trainer_defaults()
    assert d["eta_w"] == TrainerConfig().eta_w
    assert set(d) == set(TrainerConfig.field_names())
