import sys
from contextlib import contextmanager
from copy import deepcopy

import progressbar
from colorama import Fore, Style

from hybridrag.cli import WIDGET_BAR_PROGRESS, CLIConfig


def print_msg(msg: str):
    if CLIConfig().stdout:
        print(msg)


def print_err(msg: str):
    print(f"{Fore.RED}{msg}{Style.RESET_ALL}", file=sys.stderr)


def print_header(msg: str):
    print_msg(f"{Fore.LIGHTBLACK_EX}{'#' * 80}")
    print_msg(f"{Fore.GREEN}{Style.BRIGHT}{msg}")
    print_msg(f"{Fore.LIGHTBLACK_EX}{'#' * 80}")


@contextmanager
def manage_progressbar(*, max_value: int, prefix: str):
    if CLIConfig().stdout and max_value:
        with progressbar.ProgressBar(
            widgets=deepcopy(WIDGET_BAR_PROGRESS),
            max_value=max_value,
            prefix=prefix,
            fd=sys.stderr,
        ) as bar:
            yield bar
    else:

        class DisabledBar:
            def update(self, *args, **kargs):
                pass

        yield DisabledBar()
