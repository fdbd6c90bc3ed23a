"""Command-line interface for the neuromorphic flow pipeline."""
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, NoReturn, Optional
import logging

import click
import typer
from dotenv import load_dotenv
from typer.core import TyperGroup

try:  # typer>=0.22 vendors click and raises its own exception classes
    from typer._click.exceptions import UsageError
except ImportError:
    from click import UsageError

from backends import build_backend
from core.bench import bench_compare
from core.config_loader import build_pipeline, build_pipeline_config, build_scene_spec, load_profile, merge_configs
from core.errors import ConfigError, NeuroFlowError
from core.frame_io import read_flo, read_pgm, write_flo, write_ppm
from core.orchestrator import load_source
from core.scenes import gen_scene, write_scene
from core.settings import PipelineConfig
from tasks.polar import flow_to_rgb


class CliGroup(TyperGroup):
    """Группа команд: ошибки использования завершаются кодом 1, код 2 остаётся за ошибками данных."""

    def make_context(self, info_name, args, parent=None, **extra):  # type: ignore[override]
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except UsageError as exc:
            exc.exit_code = 1
            raise

    def invoke(self, ctx: click.Context):  # type: ignore[override]
        try:
            return super().invoke(ctx)
        except UsageError as exc:
            exc.exit_code = 1
            raise


app = typer.Typer(
    cls=CliGroup,
    help="CLI нейроморфного оптического потока: синтетические сцены, прогон конвейера и бенчмарк.",
)

CONFIG_OPTION = typer.Option("base", "--config", "-c", help="Имя профиля из config/ или путь к YAML/JSON файлу.")


def _fail(exc: Exception) -> NoReturn:
    code = getattr(exc, "exit_code", 1)
    color = typer.colors.YELLOW if code == 1 else typer.colors.RED
    typer.secho(f"Ошибка: {exc}", fg=color, err=True)
    raise typer.Exit(code=code)


def _configure_logging(config: PipelineConfig) -> None:
    logging.basicConfig(level=config.logging.level.upper(), format=config.logging.format)


def _load_config(
    profile: str,
    *,
    mode: Optional[str] = None,
    backend: Optional[str] = None,
    seed: Optional[int] = None,
    input_dir: Optional[Path] = None,
) -> PipelineConfig:
    load_dotenv()
    data = load_profile(profile)
    overrides: Dict[str, Any] = {}
    if mode is not None:
        overrides["mode"] = mode
    if backend is not None:
        overrides["flow"] = {"kind": backend}
    if input_dir is not None:
        overrides["paths"] = {"input_dir": str(input_dir)}
        overrides["scene"] = None
    elif seed is not None and isinstance(data.get("scene"), dict):
        overrides["scene"] = {"seed": seed}
    config = build_pipeline_config(merge_configs(data, overrides))
    _configure_logging(config)
    return config


@app.command()
def synth(
    config: str = typer.Option("scenes/sprite", "--config", "-c", help="Профиль сцены (секция scene или спецификация целиком)."),
    out: Path = typer.Option(..., "--out", "-o", help="Каталог для кадров и эталонной разметки."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Зерно генератора текстур."),
) -> None:
    """Сгенерировать синтетическую сцену с эталонными масками, потоком и рамками."""

    try:
        load_dotenv()
        data = load_profile(config)
        if seed is not None:
            section = {"scene": {"seed": seed}} if "scene" in data else {"seed": seed}
            data = merge_configs(data, section)
        spec = build_scene_spec(data)
        scene = gen_scene(spec)
        write_scene(scene, out)
    except NeuroFlowError as exc:
        _fail(exc)
    typer.echo(f"Сцена {spec.width}x{spec.height}, кадров: {spec.frames}, записана в {out}")


@app.command()
def run(
    config: str = CONFIG_OPTION,
    mode: Optional[str] = typer.Option(None, "--mode", "-m", help="neuromorphic или conventional."),
    backend: Optional[str] = typer.Option(None, "--backend", "-b", help="farneback, blockmatch или external."),
    input_dir: Optional[Path] = typer.Option(None, "--input", "-i", help="Каталог с кадрами PGM или сценой."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Каталог для результатов прогона."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Зерно синтетической сцены профиля."),
) -> None:
    """Прогнать конвейер на последовательности кадров и сохранить результаты."""

    try:
        pipeline_config = _load_config(config, mode=mode, backend=backend, seed=seed, input_dir=input_dir)
        orchestrator = build_pipeline(pipeline_config)
        result = orchestrator.run(load_source(pipeline_config))
        target = orchestrator.write_result(result, out or Path(pipeline_config.paths.output_dir))
    except NeuroFlowError as exc:
        _fail(exc)

    report = result.report
    typer.echo(f"Режим: {result.mode}, пар кадров: {len(result.outputs)}, ROI всего: {sum(report.roi_counts)}")
    typer.echo(f"Время потока: {report.total_time('flow'):.4f} с")
    for metric in ("ssim", "pa", "mean_iou"):
        value = report.mean(metric)
        if value is not None:
            typer.echo(f"{metric}: {value:.4f}")
    typer.echo(f"Результаты сохранены в {target}")


@app.command()
def bench(
    config: str = CONFIG_OPTION,
    backend: Optional[str] = typer.Option(None, "--backend", "-b", help="farneback, blockmatch или external."),
    reps: Optional[int] = typer.Option(None, "--reps", "-r", help="Число повторов (не меньше 3)."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Каталог для bench.json."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Зерно синтетической сцены профиля."),
) -> None:
    """Сравнить нейроморфный и обычный режимы по времени и точности."""

    try:
        pipeline_config = _load_config(config, backend=backend, seed=seed)
        report = bench_compare(pipeline_config, reps)
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            report.write_json(out / "bench.json")
    except NeuroFlowError as exc:
        _fail(exc)

    typer.echo(report.format_table())
    if out is not None:
        typer.echo(f"Отчёт сохранён в {out / 'bench.json'}")


@app.command()
def flow(
    prev: Path = typer.Argument(..., help="Предыдущий кадр (PGM)."),
    curr: Path = typer.Argument(..., help="Текущий кадр (PGM)."),
    out: Path = typer.Option(..., "--out", "-o", help="Файл .flo для результата."),
    config: str = CONFIG_OPTION,
    backend: Optional[str] = typer.Option(None, "--backend", "-b", help="farneback, blockmatch или external."),
) -> None:
    """Вычислить плотный поток для одной пары кадров."""

    try:
        pipeline_config = _load_config(config, backend=backend)
        estimator = build_backend(pipeline_config.flow)
        field = estimator.estimate(read_pgm(prev), read_pgm(curr))
        write_flo(field, out)
    except NeuroFlowError as exc:
        _fail(exc)
    typer.echo(f"Поток {field.width}x{field.height} ({estimator.name}) записан в {out}")


@app.command()
def viz(
    flo: Path = typer.Argument(..., help="Файл потока .flo."),
    out: Path = typer.Option(..., "--out", "-o", help="Файл PPM с цветовой картой потока."),
    mag_ref: float = typer.Option(8.0, "--mag-ref", help="Модуль потока (пикс/кадр) для полной яркости."),
) -> None:
    """Раскрасить поток в HSV: оттенок по направлению, яркость по модулю."""

    try:
        if mag_ref <= 0:
            raise ConfigError("--mag-ref должен быть положительным")
        write_ppm(flow_to_rgb(read_flo(flo), mag_ref), out)
    except NeuroFlowError as exc:
        _fail(exc)
    typer.echo(f"Визуализация записана в {out}")


if __name__ == "__main__":  # pragma: no cover - точка входа для запуска модуля
    app()
