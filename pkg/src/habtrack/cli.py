"""Command-line entry points: decode, serve, replay, simulate."""

from __future__ import annotations

import argparse
import asyncio
import sys
from pathlib import Path

from .audio import pcm16_to_block, read_wav, write_wav
from .ax25 import LinebitsDecoder
from .modem import Demodulator, ModemConfig
from .service import ServiceConfig, serve
from .sim import delivered_to_ndjson, load_scenario, render_flight_audio


def _add_decode(sub):
    p = sub.add_parser("decode", help="decode an audio file to TNC2 monitor text")
    p.add_argument("audio", help="WAV file, or raw 16-bit LE mono PCM with --raw")
    p.add_argument("--raw", action="store_true", help="input is headerless PCM")
    p.add_argument("--rate", type=int, default=48000, help="sample rate for --raw")
    p.set_defaults(func=cmd_decode)


def cmd_decode(args) -> int:
    if args.raw:
        block = pcm16_to_block(Path(args.audio).read_bytes(), args.rate)
    else:
        block = read_wav(args.audio)
    cfg = ModemConfig(sample_rate=block.sample_rate)
    demod = Demodulator(cfg)
    decoder = LinebitsDecoder()
    events = decoder.push(demod.process(block), at=0.0)
    events += decoder.push(demod.flush(), at=block.duration_s)
    for event in events:
        print(event.frame.to_tnc2())
    print(
        f"# {decoder.frames_ok} frames, {decoder.rejected} rejected",
        file=sys.stderr,
    )
    return 0


def _add_serve(sub):
    p = sub.add_parser("serve", help="run the tracking service")
    p.add_argument("--wav", help="replay a WAV file as the audio source")
    p.add_argument("--raw-pcm", help="replay headerless 16-bit LE mono PCM")
    p.add_argument("--pcm-rate", type=int, default=48000)
    p.add_argument("--kiss-listen", type=int, help="accept KISS TCP clients on this port")
    p.add_argument("--kiss-connect", help="connect to a KISS TNC at host:port")
    p.add_argument(
        "--nmea",
        help="own-GPS NMEA source: file path, serial device (path:baud), or '-' for stdin",
    )
    p.add_argument("--http-port", type=int, default=8080)
    p.add_argument("--http-host", default="127.0.0.1")
    p.add_argument("--log", help="append NDJSON events to this file")
    p.add_argument("--target", help="initial target callsign, e.g. W3EAX-12")
    p.add_argument("--tail-window", type=float, default=7200.0)
    p.add_argument("--loss-threshold", type=float, default=120.0)
    p.add_argument("--ui", help="directory with the built chase UI bundle")
    p.add_argument("--tiles", help="local map-tile cache directory")
    p.add_argument(
        "--fast",
        action="store_true",
        help="replay file sources as fast as possible instead of real time",
    )
    p.set_defaults(func=cmd_serve)


def cmd_serve(args) -> int:
    ui_dir = args.ui
    if ui_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if bundled.is_dir():
            ui_dir = str(bundled)
    cfg = ServiceConfig(
        wav_path=args.wav,
        raw_pcm_path=args.raw_pcm,
        raw_pcm_rate=args.pcm_rate,
        kiss_listen_port=args.kiss_listen,
        kiss_connect=args.kiss_connect,
        nmea_path=args.nmea,
        http_port=args.http_port,
        http_host=args.http_host,
        log_path=args.log,
        tail_window_s=args.tail_window,
        loss_threshold_s=args.loss_threshold,
        target=args.target,
        ui_dir=ui_dir,
        tiles_dir=args.tiles,
        realtime=not args.fast,
    )
    serve(cfg)
    return 0


def _add_replay(sub):
    p = sub.add_parser("replay", help="serve a recorded NDJSON event log")
    p.add_argument("log", help="NDJSON event log file")
    p.add_argument("--speed", type=float, default=0.0, help="0 = fold instantly")
    p.add_argument("--http-port", type=int, default=8080)
    p.add_argument("--http-host", default="127.0.0.1")
    p.add_argument("--ui", help="directory with the built chase UI bundle")
    p.add_argument("--tiles", help="local map-tile cache directory")
    p.set_defaults(func=cmd_replay)


def cmd_replay(args) -> int:
    import uvicorn

    from .service import build_replay_app, load_replay

    core = load_replay(args.log)
    app = build_replay_app(core, ui_dir=args.ui, tiles_dir=args.tiles)

    async def run():
        replay_task = asyncio.create_task(core.run(speed=args.speed))
        server = uvicorn.Server(
            uvicorn.Config(
                app, host=args.http_host, port=args.http_port, log_level="warning"
            )
        )
        try:
            await server.serve()
        finally:
            replay_task.cancel()
            await asyncio.gather(replay_task, return_exceptions=True)

    asyncio.run(run())
    return 0


def _add_simulate(sub):
    p = sub.add_parser("simulate", help="run a flight scenario")
    p.add_argument("scenario", help="scenario JSON file (see bundled ns75/ns77)")
    p.add_argument("--out-ndjson", help="write the delivered-frame timeline here")
    p.add_argument("--out-wav", help="render delivered frames to AFSK audio")
    p.add_argument("--out-nmea", help="write the own-position NMEA walk here")
    p.add_argument("--snr", type=float, help="noise level for --out-wav (dB)")
    p.add_argument("--kiss-port", type=int, help="serve frames over KISS TCP once")
    p.add_argument("--speed", type=float, default=0.0, help="KISS playback speed")
    p.set_defaults(func=cmd_simulate)


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    delivered, dropped = scenario.delivered()
    trajectory = scenario.trajectory()
    print(
        f"{scenario.name}: {len(trajectory)} fixes over "
        f"{trajectory[-1].time - trajectory[0].time:.0f} s, "
        f"{len(delivered)} frames delivered, {len(dropped)} dropped",
        file=sys.stderr,
    )
    if args.out_ndjson:
        Path(args.out_ndjson).write_text(delivered_to_ndjson(delivered))
    if args.out_nmea:
        if scenario.own_path is None:
            print("scenario has no own_path; nothing to write", file=sys.stderr)
            return 2
        lines = [line for _, line in scenario.own_path.nmea_lines(scenario.start_time)]
        Path(args.out_nmea).write_text("\n".join(lines) + "\n")
    if args.out_wav:
        audio = render_flight_audio(delivered, snr_db=args.snr, seed=scenario.seed)
        write_wav(args.out_wav, audio)
    if args.kiss_port:
        from .service import kiss_playback

        asyncio.run(kiss_playback(delivered, args.kiss_port, speed=args.speed))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="habtrack",
        description="Offline APRS ground station for balloon chase teams",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_decode(sub)
    _add_serve(sub)
    _add_replay(sub)
    _add_simulate(sub)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
