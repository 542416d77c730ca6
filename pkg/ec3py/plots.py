import numpy as np
from matplotlib import font_manager
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure


class RegretPlot:
    r"""
    Plot mean cumulative regret against the slot on a logarithmic
    x-axis, with a shaded band of one standard deviation.

    Parameters
    ----------
    table : dict-like
        Aggregated results with the columns "t", "mean_regret" and
        "std_regret", e.g. the table written to results.csv.
    label : string, optional
        Legend label of the curve. Default: None
    lw : float, optional
        The width of the line. Default: 2 px.
    fontsize : integer, optional
        The font size for the labels in the plot. Default: 18 pt.
    figsize : tuple of integers, optional
        The size of the plot in (width, height) in inches. Default: (10, 8)
    color : string, optional
        The color of the curve and band. Default: the next color in
        the cycle
    plot : :class:`RegretPlot`, optional
        An existing plot to add this curve to.

    Examples
    --------
    >>> p = RegretPlot(results, label="HammingRep")
    >>> p.add_curve(baseline, label="Uncoded")
    >>> p.savefig("regret.svg")
    """
    def __init__(self, table, label=None, lw=2, fontsize=18,
                 figsize=(10, 8), color=None, plot=None):
        if plot is None:
            self.fig = Figure(figsize=figsize)
            FigureCanvasAgg(self.fig)
            self.ax = self.fig.add_subplot(111)
            self.lines = []
            for axis in ['top', 'bottom', 'left', 'right']:
                self.ax.spines[axis].set_linewidth(2)
        else:
            self.fig = plot.fig
            self.ax = plot.ax
            self.lines = plot.lines
        self.legend = None
        self.fontsize = fontsize
        self.add_curve(table, label=label, lw=lw, color=color)
        self.ax.set_xscale("log")
        self.ax.tick_params(which="major", width=2, length=6)
        self.ax.tick_params(which="minor", width=2, length=3)
        self.ax.set_xlabel("Time slot $t$", fontdict={"size": fontsize})
        self.ax.set_ylabel("Cumulative regret", fontdict={"size": fontsize})
        fontProperties = font_manager.FontProperties(size=fontsize)
        for tick in self.ax.get_xticklabels() + self.ax.get_yticklabels():
            tick.set_fontproperties(fontProperties)

    def add_curve(self, table, label=None, lw=2, color=None):
        """
        Add another mean regret curve with its band to the plot.
        """
        t = np.asarray(table["t"], dtype="float64")
        mean = np.asarray(table["mean_regret"], dtype="float64")
        std = np.asarray(table["std_regret"], dtype="float64")
        # slot 0 has no place on a log axis
        keep = t > 0
        if color is None:
            color = f"C{len(self.lines)}"
        line, = self.ax.plot(t[keep], mean[keep], lw=lw, color=color,
                             label=label)
        self.ax.fill_between(t[keep], mean[keep]-std[keep],
                             mean[keep]+std[keep], color=color, alpha=0.3,
                             lw=0)
        self.lines.append(line)
        if label is not None:
            self.set_legend()

    def savefig(self, filename, **kwargs):
        """
        Save the figure to the file specified by *filename*.
        """
        self.fig.savefig(filename, **kwargs)

    def set_legend(self, loc='best', fontsize=16, **kwargs):
        prop = font_manager.FontProperties(size=fontsize)
        self.legend = self.ax.legend(loc=loc, prop=prop, **kwargs)

    def add_hline(self, y, lw=2, ls='-', color='green', **kwargs):
        """
        Add a horizontal line at *y*, e.g. a regret bound.
        """
        self.ax.axhline(y=y, lw=lw, ls=ls, color=color,
                        label='_nolegend_', **kwargs)

    def add_vline(self, x, lw=2, ls='-', color='green', **kwargs):
        """
        Add a vertical line at slot *x*, e.g. an episode boundary.
        """
        self.ax.axvline(x=x, lw=lw, ls=ls, color=color,
                        label='_nolegend_', **kwargs)
