import copy

import pytest
import yaml

from eimarket.config import (ConfigError, RunConfig, build_problem, check, generator_units, load_config, load_techs,
                             market_config)
from eimarket.model import Design, UnitKind

from conftest import ROOT


@pytest.fixture
def toy():
    return load_config(ROOT / "configs" / "toy.yaml")


def _write(tmp_path, doc):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump(doc))
    return p


@pytest.mark.parametrize("name", ["toy", "cycle", "synthetic"])
def test_bundled_configs_validate(name):
    cfg = load_config(ROOT / "configs" / f"{name}.yaml")
    assert cfg.name == name
    assert cfg.resolve(cfg.doc["traces"][0]).exists()


@pytest.mark.parametrize("edit, where", [
    (lambda d: d.pop("strips"), "<root>"),
    (lambda d: d.update(schema_version=2), "schema_version"),
    (lambda d: d["market"].update(design="CAPACITY"), "market/design"),
    (lambda d: d["market"].update(rps=1.5), "market/rps"),
    (lambda d: d["iolr"].update(link="teleport"), "iolr/link"),
])
def test_schema_errors_name_the_field(toy, edit, where):
    doc = copy.deepcopy(toy.doc)
    edit(doc)
    with pytest.raises(ConfigError, match=where):
        check(doc)


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1, 2\n")
    with pytest.raises(ConfigError, match="YAML"):
        load_config(bad)
    bad.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(bad)


def test_techs_file_with_overrides(toy):
    techs = load_techs(toy)
    assert techs["ccgt"].expansion_bits == 3
    assert techs["ccgt"].variable_cost == 54.0
    assert techs["recip"].expansion_bits == 5


def test_generator_ids_round_robin(toy):
    ids = [u.id for u in generator_units(toy, load_techs(toy))]
    assert ids == ["gen_1_ccgt", "gen_2_ocgt", "gen_3_ccgt"]
    wide = toy.with_overrides(competitors=12)
    ids = [u.id for u in generator_units(wide, load_techs(wide))]
    assert ids[0] == "gen_01_ccgt" and len(set(ids)) == 12


def test_overrides_revalidate(toy):
    assert market_config(toy.with_overrides(design="eom")).design == Design.EOM
    assert market_config(toy.with_overrides(rps=0.1)).rps == 0.1
    with pytest.raises(ConfigError):
        toy.with_overrides(rps=2.0)
    assert toy.doc["market"]["design"] == "EIM"


def test_unknown_techs_rejected(toy, tmp_path):
    doc = copy.deepcopy(toy.doc)
    doc["generators"] = [{"id": "a", "tech": "fusion"}]
    with pytest.raises(ConfigError, match="fusion"):
        generator_units(RunConfig(doc, toy.base_dir), load_techs(toy))
    doc = copy.deepcopy(toy.doc)
    doc["iolr"]["candidates"] = ["fusion"]
    with pytest.raises(ConfigError, match="fusion"):
        build_problem(RunConfig(doc, toy.base_dir))


def test_missing_traces_is_a_config_error(toy):
    doc = copy.deepcopy(toy.doc)
    doc["traces"] = ["does_not_exist.csv"]
    with pytest.raises(ConfigError, match="traces"):
        build_problem(RunConfig(doc, toy.base_dir))


def test_build_problem(toy):
    p = build_problem(toy)
    assert len(p.scenario_set) == 2
    assert all(sc.num_intervals == 48 for sc in p.scenario_set)
    assert len(p.vre) == 1 and p.vre[0].kind == UnitKind.FIXED_VRE and p.vre[0].capacity > 0
    assert all(s.peak_demand > 0 for s in p.strips)
    assert p.contract_update == "accumulate"
