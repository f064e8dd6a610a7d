"""
Tests de bout en bout de la CLI (sous-commandes, codes de sortie, manifeste).
"""

import json

import pytest

from src.config_loader import load_config
from src.main import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, apply_overrides, build_parser, main
from src.pipelines import EXPERIMENT_RUNNERS

BASE_CONFIG = """\
model:
  d: 2
  n: {n}
  alphabet: [SG, SI]
  pi: [0.5, 0.5]
  lambda: [[{lam}, {lam}], [{lam}, {lam}]]
  seed: 123
distortion:
{distortion}
sampling:
  outer: 2
  inner: 5
  replicates: 2
  t_grid: [-1.0, 0.0, 1.0]
  alpha_grid: {alpha_grid}
  alpha_points: 5
  n_ladder: [100, 200]
  ball_alpha: 1.0
  ball_inner: 20
output:
  directory: {out}
logging:
  level: warning
"""


def write_config(tmp_path, *, n=150, lam=1.0, distortion="  kind: hamming_color\n  cap: 2", alpha_grid="[]"):
    path = tmp_path / "config.yaml"
    path.write_text(
        BASE_CONFIG.format(
            n=n, lam=lam, distortion=distortion, alpha_grid=alpha_grid, out=tmp_path / "out"
        ),
        encoding="utf-8",
    )
    return path


@pytest.fixture
def config_file(tmp_path):
    """Configuration minimale : n = 150, Hamming, cap 2."""
    return write_config(tmp_path)


def test_parser_subcommands():
    """Test sous-commandes et options globales."""
    args = build_parser().parse_args(["rd-curve", "--config", "c.yaml", "--seed", "5", "--threads", "2"])
    assert args.experiment == "rd-curve"
    assert args.seed == 5
    assert args.threads == 2


def test_parser_rejects_unknown_subcommand():
    """Test sous-commande inconnue."""
    with pytest.raises(SystemExit):
        build_parser().parse_args(["plot"])


def test_apply_overrides(config_file, tmp_path):
    """Test graine, threads et sortie surchargés."""
    config = apply_overrides(load_config(config_file), "stats", seed=9, threads=3, out=str(tmp_path / "x"))
    assert config.experiment == "stats"
    assert config.model.seed == 9
    assert config.sampling.threads == 3
    assert config.output.directory == tmp_path / "x"


def test_generate_writes_outputs_and_manifest(config_file, tmp_path):
    """Test generate : graphe, type, résumé et manifeste."""
    assert main(["generate", "--config", str(config_file)]) == EXIT_OK
    out = tmp_path / "out"
    for name in ("graph.txt", "type_pair.json", "summary.txt", "manifest.json"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["experiment"] == "generate"
    assert manifest["seeds"] == {"model": 123}
    assert "graph.txt" in manifest["outputs"]


def test_generate_is_deterministic(config_file, tmp_path):
    """Test deux runs de même graine : graphes identiques octet par octet."""
    assert main(["generate", "--config", str(config_file), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["generate", "--config", str(config_file), "--out", str(tmp_path / "b")]) == EXIT_OK
    assert (tmp_path / "a" / "graph.txt").read_bytes() == (tmp_path / "b" / "graph.txt").read_bytes()
    assert main(["generate", "--config", str(config_file), "--seed", "7", "--out", str(tmp_path / "c")]) == EXIT_OK
    assert (tmp_path / "a" / "graph.txt").read_bytes() != (tmp_path / "c" / "graph.txt").read_bytes()


@pytest.mark.parametrize("experiment", ["generate", "stats", "cumulant"])
def test_manifest_replay(config_file, tmp_path, experiment):
    """Test rejeu depuis manifest.json : chaque sortie listée identique octet par octet."""
    assert main([experiment, "--config", str(config_file), "--out", str(tmp_path / "a")]) == EXIT_OK
    manifest = tmp_path / "a" / "manifest.json"
    assert main([experiment, "--config", str(manifest), "--out", str(tmp_path / "b")]) == EXIT_OK
    outputs = json.loads(manifest.read_text())["outputs"]
    assert "summary.txt" in outputs
    for name in outputs:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    replayed = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert replayed["outputs"] == outputs
    assert replayed["seeds"] == json.loads(manifest.read_text())["seeds"]


def test_missing_config_exit_code(tmp_path):
    """Test configuration absente : code 2."""
    assert main(["generate", "--config", str(tmp_path / "absent.yaml")]) == EXIT_CONFIG


def test_invalid_config_exit_code(tmp_path):
    """Test configuration invalide (λ négatif) : code 2."""
    path = write_config(tmp_path, lam=-1.0)
    assert main(["generate", "--config", str(path)]) == EXIT_CONFIG


def test_infeasible_radius_exit_code(tmp_path):
    """Test rayon ≥ 1/2 : code 3."""
    path = write_config(tmp_path, n=2, lam=1.0)
    assert main(["generate", "--config", str(path)]) == EXIT_INFEASIBLE


def test_rd_curve_constant_distortion(tmp_path):
    """Test rd-curve, σ ≡ 0.3 : +∞ sous 0.3, 0 au-dessus."""
    path = write_config(
        tmp_path, distortion="  kind: constant\n  value: 0.3\n  cap: 2", alpha_grid="[0.1, 0.5]"
    )
    assert main(["rd-curve", "--config", str(path)]) == EXIT_OK
    lines = (tmp_path / "out" / "rd_curve.csv").read_text().splitlines()
    assert lines[0] == "alpha,R,stderr"
    assert lines[1] == "0.10000000000000001,inf,0"
    assert lines[2] == "0.5,0,0"


def test_stats_run(config_file, tmp_path):
    """Test stats : mesures, noyau, ajustement de Poisson, intensités."""
    assert main(["stats", "--config", str(config_file)]) == EXIT_OK
    out = tmp_path / "out"
    for name in ("views.csv", "pairs.csv", "colors.csv", "kernel.csv", "poisson_fit.csv", "intensity.csv"):
        assert (out / name).exists()
    assert (out / "intensity.csv").read_text().count("\n") == 1 + 2 * 4


def test_slln_check_run(config_file, tmp_path):
    """Test slln-check : une ligne de résumé par n de l'échelle."""
    assert main(["slln-check", "--config", str(config_file)]) == EXIT_OK
    summary = (tmp_path / "out" / "slln_summary.csv").read_text().splitlines()
    assert summary[0] == "n,median_tv"
    assert [line.split(",")[0] for line in summary[1:]] == ["100", "200"]


def test_cumulant_run(config_file, tmp_path):
    """Test cumulant : grilles empirique et limite, valeur nulle en t = 0."""
    assert main(["cumulant", "--config", str(config_file)]) == EXIT_OK
    limit = (tmp_path / "out" / "cumulant_limit.csv").read_text().splitlines()
    assert limit[2] == "0,0,0"
    empirical = (tmp_path / "out" / "cumulant_empirical.csv").read_text().splitlines()
    assert empirical[2].startswith("0,0,")


def test_ball_exponent_run(config_file, tmp_path):
    """Test ball-exponent : α = 1 couvre toute la boule de Hamming."""
    assert main(["ball-exponent", "--config", str(config_file)]) == EXIT_OK
    header, row = (tmp_path / "out" / "ball_exponent.csv").read_text().splitlines()
    assert header.startswith("alpha,n,hits,trials,estimate")
    assert row.split(",")[2:5] == ["20", "20", "0"]


def test_wsn_fit_synthetic(config_file, tmp_path):
    """Test wsn-fit sans CSV : jeu synthétique écrit puis ajusté."""
    assert main(["wsn-fit", "--config", str(config_file)]) == EXIT_OK
    out = tmp_path / "out"
    assert (out / "dataset" / "wsn_nodes.csv").exists()
    report = (out / "wsn_fit.txt").read_text()
    assert report.startswith("# wsn-fit\n")
    assert "nodes: 150" in report
    assert (out / "wsn_step.csv").read_text().splitlines()[0] == "alpha,R"


def test_wsn_fit_malformed_links_exit_code(config_file, tmp_path):
    """Test lien mal formé dans le CSV WSN : code 2, pas de sortie."""
    nodes = tmp_path / "nodes.csv"
    links = tmp_path / "links.csv"
    nodes.write_text("id,type,x_1,x_2\na,SG,0.1,0.1\nb,SI,0.5,0.5\n")
    links.write_text("id_u,id_v\na\n")
    with open(config_file, "a", encoding="utf-8") as f:
        f.write(f"wsn:\n  nodes_csv: {nodes}\n  links_csv: {links}\n")
    assert main(["wsn-fit", "--config", str(config_file)]) == EXIT_CONFIG
    assert not (tmp_path / "out" / "wsn_fit.txt").exists()


def test_memory_error_exit_code(config_file, monkeypatch):
    """Test support trop grand pour la mémoire : code 3 au lieu d'une trace."""

    def exhausted(config, out_dir):
        raise MemoryError("Unable to allocate 7.44 GiB")

    monkeypatch.setitem(EXPERIMENT_RUNNERS, "rd-curve", exhausted)
    assert main(["rd-curve", "--config", str(config_file)]) == EXIT_INFEASIBLE


def test_rd_curve_three_colors_default_cap(tmp_path):
    """Test rd-curve à trois couleurs au cap par défaut (30) : support élagué, code 0."""
    path = tmp_path / "config.yaml"
    path.write_text(
        BASE_CONFIG.format(
            n=300, lam=0.5, distortion="  kind: hamming_color", alpha_grid="[0.2, 0.9]", out=tmp_path / "out"
        )
        .replace("alphabet: [SG, SI]", "alphabet: [a, b, c]")
        .replace("pi: [0.5, 0.5]", "pi: [0.3, 0.3, 0.4]")
        .replace("lambda: [[0.5, 0.5], [0.5, 0.5]]", "lambda: [[0.5, 0.5, 0.5], [0.5, 0.5, 0.5], [0.5, 0.5, 0.5]]"),
        encoding="utf-8",
    )
    assert main(["rd-curve", "--config", str(path)]) == EXIT_OK
    lines = (tmp_path / "out" / "rd_curve.csv").read_text().splitlines()
    assert lines[0] == "alpha,R,stderr"
    assert len(lines) == 3
    assert float(lines[2].split(",")[1]) == 0.0
