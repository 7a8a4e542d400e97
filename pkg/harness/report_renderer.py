from jinja2 import Environment, BaseLoader, StrictUndefined, Template, meta
from typing import Dict, Any, List
import logging

from models.metrics import ComparisonReport, MetricsReport
from models.similitude import ScalingSolution

logger = logging.getLogger("dhn_similitude")

SCALING_TEMPLATE = """\
Lab-scale sizing
================
Base        full: rho={{ full.rho }} mdot_I={{ full.mdot_I }} T_s={{ full.T_s }} D={{ full.D }}
            lab:  rho={{ lab.rho }} mdot_I={{ lab.mdot_I }} T_s={{ lab.T_s }} D={{ lab.D }}
Time factor t_lab/t_full = {{ "%.5f"|format(time_factor) }}
k_T = {{ "%.4f"|format(k_T) }}

{{ "%-22s %-14s %-14s %15s %15s %-8s %-9s %11s %s"|format("parameter", "symbol", "component", "full", "lab", "unit", "group", "residual", "flag") }}
{% for row in rows -%}
{{ "%-22s %-14s %-14s %15.6g %15.6g %-8s %-9s %11.3e %s"|format(row.parameter, row.symbol, row.component, row.full_value, row.lab_value, row.unit, row.group, row.residual, row.flag) }}
{% endfor %}
Residuals (max relative per group)
{% for group, value in residuals|dictsort -%}
  {{ "%-10s %.3e"|format(group, value) }}
{% endfor %}
{% if flags -%}
Infeasible constraints
{% for flag in flags -%}
  {{ flag.component }}: {{ flag.constraint }} ({{ flag.message }})
{% endfor %}
{% else -%}
All hardware constraints satisfied.
{% endif -%}
{% for note in notes -%}
Note: {{ note }}
{% endfor %}"""

METRICS_TEMPLATE = """\
Experiment metrics
==================
Efficiency by phase
{% for phase, eff in efficiency|dictsort -%}
{% if eff.defined -%}
  {{ "%-13s useful %.3f  lost %.3f  supplied %.4g J"|format(phase, eff.useful, eff.lost, eff.supplied_J) }}
{% else -%}
  {{ "%-13s undefined (no heat supplied)"|format(phase) }}
{% endif -%}
{% endfor %}
Energy lost to the environment
{% for phase, parts in loss_breakdown|dictsort -%}
  {{ phase }}:{% for component, share in parts|dictsort %} {{ component }}={{ "%.3f"|format(share) }}{% endfor %}
{% endfor %}
{% if delay -%}
Supply-return delay: {{ "%.2f"|format(delay.delay_s) }} s (t* {{ "%.4g"|format(delay.delay_star) }}, {{ delay.pairs }} pairs)
{% endif -%}
{% for name, value in rms_errors|dictsort -%}
RMS {{ name }}: {{ "%.4g"|format(value) }}
{% endfor -%}
{% if statistics -%}
Nondimensional thermal mass temperatures
{% for tm, s in statistics|dictsort -%}
  {{ "%-10s mean %.4e  std %.4e  q25 %.4e  median %.4e  q75 %.4e"|format(tm, s.mean, s.std, s.q25, s.median, s.q75) }}
{% endfor -%}
{% endif -%}
{% for tm, ratio in mean_ratio|dictsort -%}
Full/lab mean ratio {{ tm }}: {{ "%.3f"|format(ratio) }}
{% endfor -%}
{% for note in notes -%}
Note: {{ note }}
{% endfor %}"""

COMPARISON_TEMPLATE = """\
Full-scale vs lab-scale
=======================
t* span [{{ "%.6g"|format(t_star_start) }}, {{ "%.6g"|format(t_star_end) }}] on {{ samples }} samples
{% for name, value in rms|dictsort -%}
  {{ "%-24s rms %.4e  max %.4e"|format(name, value, max_abs[name]) }}
{% endfor -%}
{% for group, value in pi_residuals|dictsort -%}
  {{ "%-10s residual %.3e"|format(group, value) }}
{% endfor -%}
{% for tm, ratio in mean_ratio|dictsort -%}
Full/lab mean ratio {{ tm }}: {{ "%.3f"|format(ratio) }}
{% endfor -%}
{% for flag in flags -%}
Flag: {{ flag }}
{% endfor %}"""


class ReportRenderer:
    def __init__(self):
        # StrictUndefined raises an error if a variable is missing
        self.env = Environment(loader=BaseLoader(), undefined=StrictUndefined)
        self._template_cache: Dict[str, Template] = {}

    def _get_template(self, template_str: str) -> Template:
        if template_str not in self._template_cache:
            self._template_cache[template_str] = self.env.from_string(template_str)
        return self._template_cache[template_str]

    def validate(self, template_str: str, context: Dict[str, Any]) -> List[str]:
        """
        Validates if all variables in the template are present in the context.
        Returns a list of missing variables.
        """
        try:
            ast = self.env.parse(template_str)
            required_vars = meta.find_undeclared_variables(ast)
            return sorted(var for var in required_vars if var not in context)
        except Exception as e:
            logger.error(f"Template validation failed: {e}")
            return [f"Template Syntax Error: {str(e)}"]

    def render(self, template_str: str, context: Dict[str, Any]) -> str:
        """Renders a string template with the provided context."""
        if not template_str:
            return ""
        try:
            template = self._get_template(template_str)
            return template.render(**context)
        except Exception as e:
            logger.error(f"Error rendering template: {e}")
            raise ValueError(f"Template rendering failed: {e}")

    def render_scaling_report(self, solution: ScalingSolution) -> str:
        return self.render(SCALING_TEMPLATE, {
            "full": solution.full_base,
            "lab": solution.lab_base,
            "time_factor": solution.time_scale_factor,
            "k_T": solution.temperature_ratio.k_T,
            "rows": solution.rows,
            "residuals": solution.residuals,
            "flags": solution.flags,
            "notes": solution.notes,
        })

    def render_metrics_report(self, report: MetricsReport) -> str:
        return self.render(METRICS_TEMPLATE, {
            "efficiency": {phase: eff.model_dump() for phase, eff in report.efficiency.items()},
            "loss_breakdown": report.loss_breakdown,
            "delay": report.delay,
            "rms_errors": report.rms_errors,
            "statistics": report.statistics,
            "mean_ratio": report.mean_ratio,
            "notes": report.notes,
        })

    def render_comparison_report(self, report: ComparisonReport) -> str:
        return self.render(COMPARISON_TEMPLATE, report.model_dump())
