/* tslint:disable */
/* eslint-disable */

/**
 * Histories and the final trajectory of one run.
 */
export class RunResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    control(k: number): Float64Array;
    cost(): Float64Array;
    final_time(): Float64Array;
    lyapunov(): Float64Array;
    pi_eq(): Float64Array;
    pi_ineq(): Float64Array;
    rhs_norm(): Float64Array;
    state(k: number): Float64Array;
    /**
     * Node times of the final trajectory.
     */
    t(): Float64Array;
    tau(): Float64Array;
    readonly accepted_steps: number;
    readonly control_dim: number;
    /**
     * Set when the integration stopped before `tau_max`.
     */
    readonly error: string | undefined;
    readonly rejected_steps: number;
    readonly state_dim: number;
}

/**
 * Largest Jacobian discrepancy of a builtin over `count` quasi-random points
 * in `[-3, 3]` for every state and control component and `t ∈ [0, 2]`.
 * `y_bound` applies to the brachistochrone only.
 */
export function check_jacobians(problem: string, y_bound: number | null | undefined, count: number): number;

/**
 * Packed right-hand-side norm at the exact double-integrator optimum on a
 * grid of `nodes` points.
 */
export function equilibrium_residual(nodes: number): number;

/**
 * Run a configuration given as TOML text. Output keys are ignored; nothing
 * is written.
 */
export function solve_config(text: string): RunResult;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_runresult_free: (a: number, b: number) => void;
    readonly check_jacobians: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly equilibrium_residual: (a: number) => [number, number, number];
    readonly runresult_accepted_steps: (a: number) => number;
    readonly runresult_control: (a: number, b: number) => [number, number];
    readonly runresult_control_dim: (a: number) => number;
    readonly runresult_cost: (a: number) => [number, number];
    readonly runresult_error: (a: number) => [number, number];
    readonly runresult_final_time: (a: number) => [number, number];
    readonly runresult_lyapunov: (a: number) => [number, number];
    readonly runresult_pi_eq: (a: number) => [number, number];
    readonly runresult_pi_ineq: (a: number) => [number, number];
    readonly runresult_rejected_steps: (a: number) => number;
    readonly runresult_rhs_norm: (a: number) => [number, number];
    readonly runresult_state: (a: number, b: number) => [number, number];
    readonly runresult_state_dim: (a: number) => number;
    readonly runresult_t: (a: number) => [number, number];
    readonly runresult_tau: (a: number) => [number, number];
    readonly solve_config: (a: number, b: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
