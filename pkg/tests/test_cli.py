import json

import pytest

from cli import EXIT_CONFIG, EXIT_DIAGNOSTIC, EXIT_IO, EXIT_OK, main, parse_config, parse_overrides
from services.simulation_service import SimulationService
from utils.errors import ConfigError

IDENTITY_3 = '[[1,0,0],[0,1,0],[0,0,1]]'


def _summary(capsys):
    return json.loads(capsys.readouterr().out)


def test_parse_overrides():
    overrides = parse_overrides(['--h=0.01', '--group', 'su2', '--potential.kind=trace',
                                 '--inertia=[1,2,3]', '--record-every=5'])
    assert overrides == {'h': 0.01, 'group': 'su2', 'potential': {'kind': 'trace'},
                         'inertia': [1, 2, 3], 'record_every': 5}


@pytest.mark.parametrize('tokens', [['stray'], ['--seed'], ['--seed', '--h=1'], ['--potential=1', '--potential.kind=x']])
def test_parse_overrides_rejects_malformed_flags(tokens):
    with pytest.raises(ConfigError):
        parse_overrides(tokens)


def test_flags_override_config_file(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'group': 'su2', 'h': 0.05, 'potential': {'kind': 'zero'}}), encoding='utf-8')
    cfg = parse_config(str(path), {'h': 0.01}, 'langevin')
    assert (cfg.group, cfg.h) == ('su2', 0.01)


def test_config_errors_name_the_key(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        parse_config(None, {'bogus': 1}, 'langevin')
    assert excinfo.value.key == 'bogus'
    assert 'bogus' in str(excinfo.value)

    broken = tmp_path / 'broken.json'
    broken.write_text('{"group": ', encoding='utf-8')
    with pytest.raises(ConfigError) as excinfo:
        parse_config(str(broken), {}, 'langevin')
    assert excinfo.value.key == 'config'

    with pytest.raises(ConfigError):
        parse_config(str(tmp_path / 'missing.json'), {}, 'langevin')


def test_check_exits_zero(tmp_path, capsys):
    code = main(['check', '--group=so3', f'--output_dir={tmp_path}'])
    assert code == EXIT_OK
    summary = _summary(capsys)
    assert summary['passed'] is True
    assert len(summary['checks']) == 31
    assert summary['artifacts'][0].endswith('checks.json')


def test_langevin_reruns_are_byte_identical(tmp_path, capsys):
    argv = ['langevin', '--group=so3', '--T=0.05', '--h=0.01', '--seed', '3',
            '--potential.kind=trace', f'--potential.A={IDENTITY_3}', f'--output_dir={tmp_path}']
    assert main(argv) == EXIT_OK
    artifacts = _summary(capsys)['artifacts']
    assert any(a.endswith('langevin_000.csv') for a in artifacts)
    assert any(a.endswith('conservation.json') for a in artifacts)
    before = {a: open(a, 'rb').read() for a in artifacts}

    assert main(argv) == EXIT_OK
    assert _summary(capsys)['artifacts'] == artifacts
    assert {a: open(a, 'rb').read() for a in artifacts} == before


def test_failed_comparison_exits_one(tmp_path, capsys):
    code = main(['compare', '--group=so3', '--T=0.05', '--h=0.01', '--record_every=1', '--n_samples=50',
                 f'--output_dir={tmp_path}'])
    assert code == EXIT_DIAGNOSTIC
    summary = _summary(capsys)
    assert summary['passed'] is False
    assert 'tr g' in summary['message']


def test_oracle_failure_exits_one(tmp_path):
    code = main(['gibbs-oracle', '--beta=1e6', '--n_samples=1', '--max_proposals=2',
                 '--potential.kind=trace', f'--potential.A={IDENTITY_3}', f'--output_dir={tmp_path}'])
    assert code == EXIT_DIAGNOSTIC


@pytest.mark.parametrize('flags', [['--bogus=1'], ['--group=so0'], ['--h=-1'], ['--config=missing.json']])
def test_config_errors_exit_two(flags, tmp_path, capsys):
    assert main(['langevin', f'--output_dir={tmp_path}'] + flags) == EXIT_CONFIG
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error['error'] == 'config'


def test_unwritable_output_exits_three(tmp_path):
    blocker = tmp_path / 'file'
    blocker.write_text('x')
    assert main(['rbm', '--T=0.01', '--h=0.01', f'--output_dir={blocker / "sub"}']) == EXIT_IO


def test_invalid_input_found_while_running_exits_two(tmp_path, monkeypatch, capsys):
    def fail(self, cfg):
        raise ValueError("invalid initial state: m not in so(3)")
    monkeypatch.setattr(SimulationService, 'run', fail)
    assert main(['langevin', '--T=0.01', f'--output_dir={tmp_path}']) == EXIT_CONFIG
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error['error'] == 'config'
    assert 'initial state' in error['detail']
