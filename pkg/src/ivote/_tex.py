from warnings import warn

from .__about__ import __version__
from ._bench import DOMINANT_OPERATION


def tex_comment(text):
    """Create a LaTeX comment.

    Parameters
    ----------
    text :
        text to be inserted in the comment

    Returns
    -------
        LaTeX comment
    """
    return f"% {text}\n"


def tex_begin_environment(environment, stack_env, options=None):
    """Open a LaTeX environment.

    Parameters
    ----------
    environment
        name of the environment
    stack_env
        stack of opened environments
    options, optional
        option given to the environment, by default None

    Returns
    -------
        LaTeX code for the beginning of the environment
    """
    stack_env.append(environment)
    if options is not None:
        return f"\\begin{{{environment}}}[\n{options}\n]\n"
    return f"\\begin{{{environment}}}\n"


def tex_end_all_environment(stack_env):
    """Close all opened LaTeX environments, innermost first."""
    code = ""
    while stack_env:
        code += f"\\end{{{stack_env.pop()}}}\n"
    return code


def tex_addplot(table_macro, x, y, options=None):
    """Create a LaTeX addplot command reading two columns of a pgfplots table."""
    code = "\\addplot+ "
    if options is not None:
        code += f"[{options}] "
    return code + f"table[x={x}, y={y}] {{{table_macro}}};\n"


def tex_add_legendentry(legend):
    return f"\\addlegendentry{{{tex_text(legend)}}}\n"


def tex_text(text):
    """Convert a string to LaTeX,
    escaping the special characters %, _, &, #, $, {, }, ~.
    """
    return (text.replace("%", "\\%").replace("_", "\\_").replace("&", "\\&").replace("#", "\\#")
            .replace("$", "\\$").replace("{", "\\{").replace("}", "\\}").replace("~", "\\textasciitilde "))


def _format_value(value):
    return "nan" if value != value else f"{value:g}"


def operation_curves(report):
    """Median dominant-operation count per sweep value, one column per curve.

    Returns
    -------
        ``(table, labels)``: a DataFrame indexed by sweep value and a mapping
        from column name to legend text
    """
    table = report.table()
    fractions = sorted(table["inlier_fraction"].unique())
    table["dominant_ops"] = [row[DOMINANT_OPERATION[row["algo"]]] for _, row in table.iterrows()]
    medians = table.groupby(["sweep_value", "algo", "inlier_fraction"])["dominant_ops"].median().unstack(["algo", "inlier_fraction"])
    columns, labels = {}, {}
    for algo, fraction in medians.columns:
        if len(fractions) == 1:
            name, label = algo, algo
        else:
            name, label = f"{algo}-{fractions.index(fraction)}", f"{algo} ({100 * fraction:g}%)"
        columns[(algo, fraction)] = name
        labels[name] = label
    medians.columns = [columns[c] for c in medians.columns]
    return medians.sort_index(), labels


def export_tex(report, path=None, axis_options=None, include_disclaimer=True):
    """Get the pgfplots code of the operation-count curves of a report.

    Parameters
    ----------
    report
        RunReport to plot
    path, optional
        file to write the code to, by default None
    axis_options, optional
        options appended to the axis environment, by default None
    include_disclaimer, optional
        start the code with a comment naming the generator, by default True

    Returns
    -------
        string of tikz code
    """
    code = ""
    if include_disclaimer:
        code += tex_comment(f"This file was created with ivote v{__version__}.")
    stack_env = []
    if not report.records:
        warn("No runs in report.")
        options = "xmode=log,\nymode=log"
        code += tex_begin_environment("tikzpicture", stack_env)
        code += tex_begin_environment("axis", stack_env, options)
        code += tex_end_all_environment(stack_env)
    else:
        curves, labels = operation_curves(report)
        code += "\\pgfplotstableread{"
        code += " ".join(["sweep", *curves.columns]) + "\n"
        for value, row in curves.iterrows():
            code += " ".join(_format_value(v) for v in [value, *row.tolist()]) + "\n"
        code += "}\\dataOps\n\n"

        xlabel = report.sweep_axis or "n"
        options = [
            "xmode=log",
            "ymode=log",
            f"xlabel={{{tex_text(xlabel)}}}",
            "ylabel={dominant operations}",
            f"title={{{tex_text(report.model_tag)}}}",
            "legend pos=north west",
        ]
        if axis_options is not None:
            options.append(axis_options)
        code += tex_begin_environment("tikzpicture", stack_env)
        code += tex_begin_environment("axis", stack_env, ",\n".join(options))
        for column in curves.columns:
            code += tex_addplot("\\dataOps", "sweep", column, "mark=*")
            code += tex_add_legendentry(labels[column])
        code += tex_end_all_environment(stack_env)

    if path is not None:
        with open(path, "w") as f:
            f.write(code)
    return code
