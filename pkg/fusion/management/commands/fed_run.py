import json
import subprocess
import sys
from pathlib import Path

from django.conf import settings

from common.cli import EcoAteCommand, split_list
from fusion.config import EstimationConfig
from fusion.datasets import TARGET_SITE, read_site_table
from fusion.exceptions import ProtocolError
from fusion.federation import FileTransport, SourceNode, TargetNode
from fusion.management.options import source_bases


class Command(EcoAteCommand):
    """Management command running one site of the protocol over a shared directory.

    ``--role target`` and ``--role source`` run a single site each, typically as
    separate processes; ``--role all`` spawns one process per source and runs the
    target in the current process.
    """

    help = "Run a site of the federated protocol over a shared message directory"
    command_name = "fed-run"

    def add_command_arguments(self, parser):
        parser.add_argument("--role", choices=["target", "source", "all"])
        parser.add_argument("--dir", help="Shared message directory")
        parser.add_argument(
            "--data", help="This site's table (the target's for --role all)"
        )
        parser.add_argument("--xi", action="append", help="Weight basis of the source(s)")
        parser.add_argument("--site-id", help="Site id of a source")
        parser.add_argument("--target-id", help=f"Target site id (default {TARGET_SITE})")
        parser.add_argument(
            "--sources", help="Comma-separated source ids the target waits for"
        )
        parser.add_argument(
            "--source", action="append", help="Source table for --role all (repeat)"
        )
        parser.add_argument("--output", help="Write the target's report as JSON")

    def run(self, config):
        estimation = EstimationConfig.from_settings(**config.estimation_overrides())
        transport = FileTransport(config.dir)
        role = config.role
        if role == "source":
            self.run_source(config, estimation, transport)
        elif role == "target":
            self.run_target(config, estimation, transport, split_list(config.sources))
        else:
            self.run_all(config, estimation, transport)

    def run_source(self, config, estimation, transport):
        data = read_site_table(config.data, config.site_id)
        basis = source_bases(config.get("xi"), 1, data.dimension)[0]
        node = SourceNode(data, basis, transport, estimation)
        node.run_round1()
        target_id = config.get("target_id", TARGET_SITE)
        sent = node.run_round2(target_id, estimation.round_timeout)
        status = "sent round 2" if sent else "excluded by the target"
        self.stdout.write(self.style.SUCCESS(f"Source {data.site_id}: {status}"))

    def run_target(self, config, estimation, transport, source_ids):
        target = read_site_table(config.data, config.get("target_id", TARGET_SITE))
        if target.site_id in source_ids:
            raise ProtocolError(f"Target id {target.site_id} is also listed as a source")
        node = TargetNode(target, transport, estimation)
        round1 = node.collect_round1(source_ids, estimation.round_timeout)
        node.broadcast(round1)
        node.run_round2()
        report = node.fuse(estimation.round_timeout)
        self.stdout.write(str(report))
        if config.output:
            Path(config.output).write_text(report.to_json(), encoding="utf-8")
        return report

    def run_all(self, config, estimation, transport):
        paths = config.get("source", [])
        target = read_site_table(config.data, config.get("target_id", TARGET_SITE))
        bases = source_bases(config.get("xi"), len(paths), target.dimension)
        source_ids = [str(index) for index in range(1, len(paths) + 1)]
        overrides = config.estimation_overrides()
        processes = []
        for site_id, path, basis in zip(source_ids, paths, bases):
            xi = "none" if basis is None else ";".join(basis.forms)
            argv = [sys.executable, "-m", "eco_ate.cli", "fed-run", "--role", "source"]
            argv += ["--dir", str(config.dir), "--data", str(path), "--site-id", site_id]
            argv += ["--target-id", target.site_id, "--xi", xi]
            for key, value in overrides.items():
                argv.extend([f"--{key.replace('_', '-')}", str(value)])
            processes.append(subprocess.Popen(argv, cwd=settings.BASE_DIR))
        try:
            self.run_target(config, estimation, transport, source_ids)
        finally:
            codes = [process.wait() for process in processes]
        failed = [site_id for site_id, code in zip(source_ids, codes) if code != 0]
        if failed:
            self.stderr.write(f"Source processes {failed} exited with errors")
        self.stdout.write(json.dumps(transport.transcript_rows(), sort_keys=True))
