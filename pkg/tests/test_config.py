import pytest

from bridgelab.config import SCHEMA, RunConfig, derive_seed
from bridgelab.errors import ConfigurationError


def test_defaults_validate():
    cfg = RunConfig()
    assert cfg.process_spec().kind == "ouve"
    assert cfg.grid().n_steps == 30
    assert cfg.stft().win_len == 510


def test_text_round_trip():
    cfg = RunConfig.from_text("[process]\nc = 0.01\n[train]\nt = random\nm0 = 1.0, 2.0\ny = 0, 0\n")
    again = RunConfig.from_text(cfg.to_text())
    assert again.values == cfg.values
    assert again["train"]["t"] is None
    assert again["train"]["m0"] == [1.0, 2.0]


def test_every_schema_key_is_echoed():
    text = RunConfig().to_text()
    for sec, keys in SCHEMA.items():
        assert f"[{sec}]" in text
        for key in keys:
            assert f"\n{key} = " in text


@pytest.mark.parametrize(
    "text",
    [
        "[process]\ngama = 1.5\n",
        "[nonsense]\nx = 1\n",
        "[process]\nk = 1.0\n",
        "[process]\nkind = linear\n",
        "[grid]\nn_steps = 0\n",
        "[sim]\nn_paths = many\n",
        "[stft]\nhop = 600\n",
        "[loss]\nalpha_p = 0.5\n",
        "[loss]\nlambda_kind = custom\n",
        "[train]\nloss_kind = hinge\n",
        "[train]\nm0 = 1, 2\n",
        "not an ini file",
    ],
)
def test_invalid_configs_rejected(text):
    with pytest.raises(ConfigurationError):
        RunConfig.from_text(text)


def test_seed_streams_are_distinct_and_stable():
    a, b = derive_seed(0, "sim"), derive_seed(0, "train")
    assert a != b
    assert derive_seed(0, "sim") == a
    assert derive_seed(1, "sim") != a
    assert RunConfig().sim("sim").seed == a
