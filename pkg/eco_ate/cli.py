"""Single ``eco-ate`` entry point over the project's management commands.

``eco-ate simulate ...`` is equivalent to ``python manage.py simulate ...``; the
hyphenated ``fed-run`` spelling maps onto the ``fed_run`` command module.
"""

import os
import sys

SUBCOMMANDS = {
    "simulate": "simulate",
    "fed-run": "fed_run",
    "fed_run": "fed_run",
    "estimate": "estimate",
    "report": "report",
}

USAGE = (
    "usage: eco-ate {simulate,fed-run,estimate,report} [options]\n"
    "Run 'eco-ate <command> --help' for the flags of each command."
)


def main(argv=None):
    """Dispatch ``argv`` to the matching management command.

    Parameters
    ----------
    argv : list of str, optional
        Arguments without the program name; defaults to ``sys.argv[1:]``

    Returns
    -------
    None
        Exits the process with the command's exit code (0, 1 or 2)
    """
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "eco_ate.settings")
    argv = list(sys.argv[1:] if argv is None else argv)

    if not argv or argv[0] in ("-h", "--help"):
        print(USAGE)
        sys.exit(0 if argv else 2)

    command = SUBCOMMANDS.get(argv[0])
    if command is None:
        print(f"eco-ate: unknown command '{argv[0]}'\n{USAGE}", file=sys.stderr)
        sys.exit(2)

    from django.core.management import execute_from_command_line

    execute_from_command_line(["eco-ate", command, *argv[1:]])
    sys.exit(0)


if __name__ == "__main__":
    main()
