"""
Batch front-end

    python cli.py <command> [--config file.json] [--key=value ...]

Flag values are parsed as JSON when possible (`--h=0.01`, `--inertia=[1,2,3]`),
otherwise kept as strings (`--group=su2`). Dotted keys reach nested fields
(`--potential.kind=trace`). Flags override values from the config file.

Exit codes: 0 success, 1 diagnostic failure, 2 config error, 3 I/O error.
"""
import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from config import configure_logging
from models.schemas import Command, RunConfig
from services.simulation_service import SimulationService
from utils.errors import ConfigError, LieLangevinError, OutputError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DIAGNOSTIC = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_overrides(tokens: Sequence[str]) -> Dict[str, Any]:
    """
    `--key=value` / `--key value` 토큰 → 중첩 dict

    Args:
        tokens: argparse가 처리하지 않은 나머지 인자

    Returns:
        {'h': 0.01, 'potential': {'kind': 'trace'}} 형태의 dict
    """
    overrides: Dict[str, Any] = {}
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if not token.startswith('--') or token == '--':
            raise ConfigError(f"unexpected argument: {token}", key=token)
        body = token[2:]
        if '=' in body:
            key, raw = body.split('=', 1)
        elif i + 1 < len(tokens) and not tokens[i + 1].startswith('--'):
            key, raw = body, tokens[i + 1]
            i += 1
        else:
            raise ConfigError(f"flag --{body} needs a value", key=body)
        i += 1

        path = key.replace('-', '_').split('.')
        node = overrides
        for part in path[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"conflicting flags for {key}", key=key)
            node = child
        node[path[-1]] = _parse_value(raw)
    return overrides


def _merge(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _validation_message(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        key = '.'.join(str(p) for p in item['loc']) or '<config>'
        parts.append(f"{key}: {item['msg']}")
    return '; '.join(parts)


def parse_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None,
                 command: Optional[str] = None) -> RunConfig:
    """
    JSON 파일 + 플래그 → 검증된 RunConfig

    Args:
        path: JSON 설정 파일 경로 (선택)
        overrides: 플래그에서 온 값 (파일 값보다 우선)
        command: 위치 인자로 받은 명령 (가장 우선)

    Returns:
        RunConfig

    Raises:
        ConfigError: 잘못된 JSON, 알 수 없는 키, 불변식 위반 (메시지에 키 이름 포함)
    """
    document: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                document = json.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}", key='config') from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON in {path}: {e}", key='config') from e
        if not isinstance(document, dict):
            raise ConfigError(f"config file {path} must hold a JSON object", key='config')

    document = _merge(document, overrides or {})
    if command is not None:
        document['command'] = command

    try:
        return RunConfig.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]['loc'] if e.errors() else ()
        raise ConfigError(_validation_message(e), key='.'.join(str(p) for p in first) or None) from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='cli.py',
        description='Structure-preserving SDEs on matrix Lie groups',
    )
    parser.add_argument('command', choices=[c.value for c in Command], help='what to run')
    parser.add_argument('--config', default=None, help='JSON run configuration')
    parser.add_argument('--log-level', default=None, help='overrides LOG_LEVEL')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args, rest = build_parser().parse_known_args(argv)
    configure_logging(args.log_level)

    try:
        cfg = parse_config(args.config, parse_overrides(rest), args.command)
    except ConfigError as e:
        logger.error("❌ config error: %s", e)
        print(json.dumps({'error': 'config', 'key': e.key, 'detail': str(e)}), file=sys.stderr)
        return EXIT_CONFIG

    try:
        summary = SimulationService().run(cfg)
    except (OutputError, OSError) as e:
        logger.error("❌ I/O error: %s", e)
        return EXIT_IO
    except ConfigError as e:
        logger.error("❌ config error: %s", e)
        return EXIT_CONFIG
    except LieLangevinError as e:
        logger.error("❌ %s: %s", type(e).__name__, e)
        return EXIT_DIAGNOSTIC
    except ValueError as e:
        # 검증 후에 드러나는 잘못된 입력 (초기 상태, 퍼텐셜 파라미터)
        logger.error("❌ invalid input: %s", e)
        print(json.dumps({'error': 'config', 'key': None, 'detail': str(e)}), file=sys.stderr)
        return EXIT_CONFIG

    print(summary.model_dump_json(indent=2))
    return summary.exit_code


if __name__ == '__main__':
    sys.exit(main())
