/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_runresult_free: (a: number, b: number) => void;
export const check_jacobians: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const equilibrium_residual: (a: number) => [number, number, number];
export const runresult_accepted_steps: (a: number) => number;
export const runresult_control: (a: number, b: number) => [number, number];
export const runresult_control_dim: (a: number) => number;
export const runresult_cost: (a: number) => [number, number];
export const runresult_error: (a: number) => [number, number];
export const runresult_final_time: (a: number) => [number, number];
export const runresult_lyapunov: (a: number) => [number, number];
export const runresult_pi_eq: (a: number) => [number, number];
export const runresult_pi_ineq: (a: number) => [number, number];
export const runresult_rejected_steps: (a: number) => number;
export const runresult_rhs_norm: (a: number) => [number, number];
export const runresult_state: (a: number, b: number) => [number, number];
export const runresult_state_dim: (a: number) => number;
export const runresult_t: (a: number) => [number, number];
export const runresult_tau: (a: number) => [number, number];
export const solve_config: (a: number, b: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
