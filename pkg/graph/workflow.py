"""
LangGraph Workflow: the pseudo-label stages as a linear agent graph.

Graph structure:
    load → separate → filter → assign → aggregate → generate

Every node is a plain function state → partial update and can be called
directly; the graph only fixes the order.
"""

from typing import Optional

from langgraph.graph import StateGraph, END

from config.run_config import RunConfig, load_class_table
from models.errors import ShapeError
from models.grid import VoxelGrid
from models.scene import SceneData
from models.state import PseudoLabelState
from agents.separator import separator_agent
from agents.noise_filter import noise_filter_agent
from agents.semantics import semantics_agent
from agents.aggregator import aggregator_agent
from agents.occupancy import occupancy_agent
from tools.console import log


def load_agent(state: PseudoLabelState) -> dict:
    """
    Pick the frame window and check every frame has a LiDAR sweep and a pose.

    Returns:
        Partial state with 'frames'.
    """
    scene, params = state["scene"], state["params"]
    if not scene.frames:
        raise ShapeError("scene has no frames")
    frames = list(scene.frames)
    if params.window:
        frames = frames[-params.window:]
    for frame in frames:
        if frame not in scene.lidar:
            raise ShapeError(f"frame {frame} has no LiDAR sweep")
        if frame not in scene.poses:
            raise ShapeError(f"frame {frame} has no pose")
    log("Load", f"{len(frames)} frame(s), {len(scene.cameras)} camera(s), current frame {frames[-1]}")
    return {"frames": frames, "counts": {"frames": len(frames)}}


def build_workflow():
    """
    Build and compile the pseudo-label workflow.

    Returns:
        Compiled StateGraph ready to invoke.
    """
    workflow = StateGraph(PseudoLabelState)

    workflow.add_node("load", load_agent)
    workflow.add_node("separate", separator_agent)
    workflow.add_node("filter", noise_filter_agent)
    workflow.add_node("assign", semantics_agent)
    workflow.add_node("aggregate", aggregator_agent)
    workflow.add_node("generate", occupancy_agent)

    workflow.set_entry_point("load")
    workflow.add_edge("load", "separate")
    workflow.add_edge("separate", "filter")
    workflow.add_edge("filter", "assign")
    workflow.add_edge("assign", "aggregate")
    workflow.add_edge("aggregate", "generate")
    workflow.add_edge("generate", END)

    return workflow.compile()


# Pre-built graph instance
graph = build_workflow()


def run_pseudo_labels(scene: SceneData, config: RunConfig, num_classes: Optional[int] = None) -> PseudoLabelState:
    """
    Invoke the graph on one scene.

    Args:
        scene: loaded scene bundle.
        config: run configuration (grid, thresholds, class table).
        num_classes: K; the length of the configured class table when omitted.

    Returns:
        Final state, including 'occupancy', 'counts' and 'warnings'.
    """
    if num_classes is None:
        num_classes = len(load_class_table(config.class_table))
    initial: PseudoLabelState = {
        "scene": scene,
        "params": config.pseudolabel,
        "grid": config.grid_spec,
        "num_classes": num_classes,
        "counts": {},
        "warnings": [],
    }
    return graph.invoke(initial)


def generate_pseudo_labels(scene: SceneData, config: RunConfig, num_classes: Optional[int] = None) -> VoxelGrid:
    """Occupancy pseudo-label grid for the scene's current frame."""
    return run_pseudo_labels(scene, config, num_classes)["occupancy"]
