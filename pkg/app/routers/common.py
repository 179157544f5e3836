import hashlib
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional

import click
from pydantic import ValidationError

from lib import VERSION, env_loader
from lib.errors import ManifestError, UnexpectedError, WorkbenchError
from lib.serialize import dumps
import schemas

logger = logging.getLogger(__name__)


@dataclass
class Settings:
    out: Optional[Path] = None
    csv_dir: Optional[Path] = None
    flags: Dict[str, Any] = field(default_factory=dict)

    def csv_path(self, name: str) -> Optional[Path]:
        if self.csv_dir is None:
            return None
        return Path(self.csv_dir) / f"{name}.csv"


@dataclass
class Outcome:
    results: Dict[str, Any]
    predictions: List[str] = field(default_factory=list)


class WarningCollector(logging.Handler):
    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.messages: List[str] = []

    def emit(self, record: logging.LogRecord) -> None:
        self.messages.append(f"{record.name}: {record.getMessage()}")


@contextmanager
def collect_warnings() -> Iterator[WarningCollector]:
    collector = WarningCollector()
    root = logging.getLogger()
    root.addHandler(collector)
    try:
        yield collector
    finally:
        root.removeHandler(collector)


def load_manifest(path: Path, settings: Settings):
    """Validated manifest plus a digest of its bytes and the effective flags"""
    data = Path(path).read_bytes()
    try:
        manifest = schemas.Manifest.model_validate_json(data)
    except ValidationError as exc:
        errors = [
            {"loc": ".".join(str(part) for part in e["loc"]), "msg": e["msg"], "type": e["type"]}
            for e in exc.errors()
        ]
        raise ManifestError("manifest failed validation", errors=errors, manifest=str(path))
    digest = hashlib.sha256(data + dumps(settings.flags)).hexdigest()
    return manifest, digest


def emit(payload: bytes, settings: Settings) -> None:
    if settings.out is not None:
        Path(settings.out).parent.mkdir(parents=True, exist_ok=True)
        Path(settings.out).write_bytes(payload + b"\n")
    else:
        click.echo(payload.decode())


def fail(err: WorkbenchError) -> None:
    """Print the JSON error envelope and exit with the error's code"""
    click.echo(dumps(err.detail(debug=env_loader.BCALC_DEBUG)).decode())
    click.get_current_context().exit(err.exit_code)


def command(name: str, help: str) -> Callable:
    """Wrap ``func(manifest, settings) -> Outcome`` as a CLI command emitting a report"""

    def wrap(func: Callable[[Any, Settings], Outcome]) -> click.Command:
        @click.command(name, help=help)
        @click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
        @click.pass_obj
        def run(settings: Settings, manifest_path: Path):
            with collect_warnings() as collector:
                try:
                    manifest, digest = load_manifest(manifest_path, settings)
                    outcome = func(manifest, settings)
                except WorkbenchError as err:
                    logger.error("%s failed: %s", name, err)
                    fail(err)
                    return
                except Exception as exc:
                    logger.exception("%s crashed", name)
                    fail(UnexpectedError.wrap(exc))
                    return
            report = schemas.Report(
                command=name,
                inputs_digest=digest,
                results=outcome.results,
                warnings=collector.messages,
                predictions=outcome.predictions,
                version=VERSION,
                timestamp=datetime.now(timezone.utc).isoformat(),
            )
            emit(dumps(report), settings)

        return run

    return wrap
