from sysacc.vm.cost import CostModel, SimReport, run_inference_loop, simulate_cost
from sysacc.vm.emit import EmitError, compile_model, emit, pack_weights
from sysacc.vm.isa import Instruction, Opcode, Program, Reg, SimdOp
from sysacc.vm.machine import AddressFault, Machine, MachineError, MachineState, run

__all__ = [
    "AddressFault", "CostModel", "EmitError", "SimReport", "compile_model", "run_inference_loop",
    "simulate_cost", "Instruction", "Machine", "MachineError", "MachineState", "Opcode",
    "Program", "Reg", "SimdOp", "emit", "pack_weights", "run",
]
