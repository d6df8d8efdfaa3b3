"""Commandline interface to the application.
"""

import json
import logging
from contextlib import contextmanager
from functools import wraps

import click

import rbcm.services as services
from rbcm.machines import Caps, InconclusiveError, ResourceLimitError, Verdict


logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)

EXIT_FALSE = 1
EXIT_UNKNOWN = 3


class UsageFailure(click.ClickException):
    """Schema and precondition errors, reported with exit code 2"""

    exit_code = 2


class NoVerdict(click.ClickException):
    """Capped simulation or resource bound left the question open"""

    exit_code = EXIT_UNKNOWN


@contextmanager
def _reported():
    try:
        yield
    except (ValueError, TypeError) as e:
        raise UsageFailure(str(e)) from e
    except OSError as e:
        raise UsageFailure(f"cannot read or write machine document: {e}") from e
    except (InconclusiveError, ResourceLimitError) as e:
        raise NoVerdict(str(e)) from e


def _verdict(ctx, holds, text):
    click.echo(text)
    if not holds:
        ctx.exit(EXIT_FALSE)


def caps_options(func):
    """Add the simulation cap options, passed on as ``caps``"""

    @click.option("--counter-cap", type=int, default=None, help="Largest counter value explored")
    @click.option("--step-cap", type=int, default=Caps.steps, show_default=True,
                  help="Configurations explored per run")
    @click.option("--tail-cap", type=int, default=None,
                  help="Consecutive counter-neutral moves on the end-marker")
    @wraps(func)
    def wrapper(*args, counter_cap, step_cap, tail_cap, **kwargs):
        caps = Caps(counter=counter_cap, steps=step_cap, tail=tail_cap)
        return func(*args, caps=caps, **kwargs)

    return wrapper


# Main entry point
@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--debug/--no-debug", default=False, envvar="RBCM_DEBUG")
def rbcm_cli(debug):
    """Reversal-bounded counter machines: analysis and closure constructions

    Machine documents are JSON and may live at any fsspec-compatible URL.
    Verdict commands exit 0 when the answer is yes and 1 when it is no;
    usage and document errors exit 2; open questions exit 3.
    """
    noisy_loggers = ["asyncio", "fsspec"]
    for logger_name in noisy_loggers:
        nl = logging.getLogger(logger_name)
        nl.setLevel(logging.WARNING)

    if debug:
        logging.root.setLevel(logging.DEBUG)
    else:
        logging.root.setLevel(logging.INFO)


@rbcm_cli.command(help="Check a machine document against the schema and invariants")
@click.argument("x", required=True)
def validate(x):
    """Validate a machine document"""
    with _reported():
        click.echo(services.validate(str(x)))


@rbcm_cli.command(help="Simulate a machine on a word within caps")
@click.argument("x", required=True)
@click.argument("word", default="")
@caps_options
@click.pass_context
def run(ctx, x, word, caps):
    """Capped simulation; exits 3 when a cap leaves the run undecided"""
    with _reported():
        result = services.run(str(x), word, caps=caps)
    if result.verdict is Verdict.UNKNOWN:
        click.echo(f"unknown ({result.bound} cap)")
        ctx.exit(EXIT_UNKNOWN)
    _verdict(ctx, result.accepted, result.verdict.value)


@rbcm_cli.command(help="Decide membership of a word exactly")
@click.argument("x", required=True)
@click.argument("word", default="")
@click.pass_context
def member(ctx, x, word):
    """Exact membership"""
    with _reported():
        holds = services.member(str(x), word)
    _verdict(ctx, holds, "member" if holds else "not a member")


@rbcm_cli.command(help="Decide emptiness exactly, printing a witness otherwise")
@click.argument("x", required=True)
@click.pass_context
def empty(ctx, x):
    """Exact emptiness"""
    with _reported():
        is_empty, witness = services.empty(str(x))
    _verdict(ctx, is_empty, "empty" if is_empty else f"nonempty, witness {witness!r}")


@rbcm_cli.command(help="List accepted words up to a length")
@click.argument("x", required=True)
@click.option("--max-len", "-n", type=int, required=True, help="Longest word listed")
@caps_options
def enum(x, max_len, caps):
    """Print one accepted word per line; the empty word as ``""``"""
    with _reported():
        words = services.enum(str(x), max_len, caps=caps)
    for w in words:
        click.echo(w if w else '""')


@rbcm_cli.command(help="Apply a closure construction and write the result")
@click.argument("operation", type=click.Choice(sorted(services.OPERATIONS)))
@click.argument("operands", nargs=-1)
@click.option("--out", "-o", required=True, help="URL to write the result document to")
@click.option(
    "--family",
    "-f",
    multiple=True,
    help="Family operand: sigma-star, epsilon, empty or a document URL",
)
@click.option("--words", help="Comma-separated finite word set; an empty item is the empty word")
@click.option("--which", type=click.Choice(["suffix", "infix"]), help="For dcm11_suffix_infix")
@click.option("--side", type=click.Choice(["left", "right"]), help="Quotient side")
@click.option(
    "--op",
    type=click.Choice(["union", "complement", "intersect_regular",
                       "pref", "suff", "infx", "outf", "emb"]),
    help="For dcm_boolean and ncm_word_ops",
)
@click.option("--gaps", type=int, help="Deleted segments for ncm_word_ops emb")
@click.option("--order", type=click.Choice(["left-first", "right-first"]),
              help="For dcm11_two_sided_quotient")
def apply(operation, operands, out, family, words, which, side, op, gaps, order):
    """Apply a closure construction"""
    options = dict(which=which, side=side, op=op, gaps=gaps, order=order)
    if words is not None:
        options["words"] = words.split(",")
    with _reported():
        result = services.apply(
            operation, [str(u) for u in operands], out=str(out), families=family, **options
        )
    click.echo(str(result))


@rbcm_cli.command(help="Compare the languages of two machines up to a length")
@click.argument("x", required=True)
@click.argument("y", required=True)
@click.option("--max-len", "-n", type=int, required=True, help="Longest word compared")
@caps_options
@click.pass_context
def eq(ctx, x, y, max_len, caps):
    """Bounded language equality"""
    with _reported():
        comparison = services.eq(str(x), str(y), max_len, caps=caps)
    if not comparison.equal:
        for w in comparison.only_left:
            click.echo(f"< {w!r}", err=True)
        for w in comparison.only_right:
            click.echo(f"> {w!r}", err=True)
    _verdict(ctx, comparison.equal, "equal" if comparison.equal else "different")


@rbcm_cli.command(help="Print a machine as Graphviz DOT")
@click.argument("x", required=True)
@click.option("--name", default=None, help="Graph name")
def dot(x, name):
    """DOT export"""
    with _reported():
        click.echo(services.dot(str(x), name=name), nl=False)


@rbcm_cli.group(help="Named example machines and bounded demonstrations")
def gallery():
    pass


@gallery.command("list", help="List gallery entries")
def gallery_list():
    for name, flavor, doc in services.gallery_list():
        click.echo(f"{name}\t{flavor}\t{doc}")


@gallery.command("build", help="Write a gallery machine document")
@click.argument("name", required=True)
@click.option("--out", "-o", required=True, help="URL to write the machine document to")
@click.option("--member", "-m", default=None, help="Machine of a family, e.g. L2")
def gallery_build(name, out, member):
    """Build a named machine"""
    with _reported():
        built = services.gallery_build(name, str(out), member=member)
    click.echo(str(built))


@gallery.command("demo", help="Run a bounded non-closure demonstration")
@click.argument("name", required=True)
@click.option("--max-len", "-n", type=int, default=None, help="Longest word examined")
@click.pass_context
def gallery_demo(ctx, name, max_len):
    """Print the demonstration report as JSON; exit 1 if the identity fails"""
    with _reported():
        report = services.gallery_demo(name, max_len=max_len)
    click.echo(json.dumps(report, indent=2, sort_keys=True, default=str))
    if not report["holds"]:
        ctx.exit(EXIT_FALSE)
