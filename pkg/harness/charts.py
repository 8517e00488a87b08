"""
Plotly charts for a run: distance to the reference, cable tension against
its lower limit, and the two Lyapunov values. Written as one static HTML
file next to the telemetry.
"""

from __future__ import annotations

from pathlib import Path

import pandas as pd
import plotly.graph_objects as go

_LAYOUT = dict(height=350, margin=dict(l=20, r=20, t=40, b=20),
               legend=dict(orientation="h", yanchor="bottom", y=1.02))


def create_distance_chart(telemetry: pd.DataFrame) -> go.Figure:
    fig = go.Figure()
    fig.add_trace(go.Scatter(
        x=telemetry["t_s"], y=telemetry["dist_m"],
        mode="lines", name="dist(p, p_d)",
        line=dict(color="#3b82f6", width=2),
    ))
    fig.add_trace(go.Scatter(
        x=telemetry["t_s"], y=telemetry["dist_ref_m"],
        mode="lines", name="dist(p_a, p_d)",
        line=dict(color="#10b981", width=2, dash="dot"),
    ))
    fig.update_yaxes(title="Great-circle distance (m)")
    fig.update_xaxes(title="Time (s)")
    fig.update_layout(title="Distance to the desired reference", **_LAYOUT)
    return fig


def create_tension_chart(telemetry: pd.DataFrame, T_c_min: float) -> go.Figure:
    fig = go.Figure()
    fig.add_trace(go.Scatter(
        x=telemetry["t_s"], y=telemetry["T_c_n"],
        mode="lines", name="Cable tension T_c",
        line=dict(color="#ef4444", width=2),
    ))
    fig.add_hline(y=T_c_min, line_dash="dash", line_color="red",
                  annotation_text=f"T_c,min ({T_c_min} N)")
    fig.update_yaxes(title="Tension (N)")
    fig.update_xaxes(title="Time (s)")
    fig.update_layout(title="Cable tension", **_LAYOUT)
    return fig


def create_lyapunov_chart(telemetry: pd.DataFrame) -> go.Figure:
    fig = go.Figure()
    for column, color in (("V_out", "#8b5cf6"), ("V_in", "#f59e0b")):
        fig.add_trace(go.Scatter(
            x=telemetry["t_s"], y=telemetry[column],
            mode="lines", name=column,
            line=dict(color=color, width=2),
        ))
    fig.update_yaxes(title="V", type="log")
    fig.update_xaxes(title="Time (s)")
    fig.update_layout(title="Lyapunov functions", **_LAYOUT)
    return fig


def write_run_charts(telemetry: pd.DataFrame, T_c_min: float, path: str | Path) -> Path:
    path = Path(path)
    figures = (create_distance_chart(telemetry), create_tension_chart(telemetry, T_c_min),
               create_lyapunov_chart(telemetry))
    parts = [fig.to_html(full_html=False, include_plotlyjs="cdn" if i == 0 else False)
             for i, fig in enumerate(figures)]
    path.write_text("<html><body>\n" + "\n".join(parts) + "\n</body></html>\n", encoding="utf-8")
    return path
