/* tslint:disable */
/* eslint-disable */

/**
 * Thermoviscoelastic contact on an `nx × ny` strip; returns the deformed
 * mesh, nodal temperature and stress magnitude per triangle at `T`.
 */
export function contact_field(nx: number, ny: number, friction: number, steps: number): string;

/**
 * Coupled benchmark with `m_A = m_B = 1` and the given margin; reports the
 * gate and, when it passes, the solution norms and Picard increments.
 */
export function coupled_system(margin: number, seed: number, steps: number): string;

export function scalar_inclusion(friction: number, amplitude: number, steps: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly contact_field: (a: number, b: number, c: number, d: number) => [number, number];
    readonly coupled_system: (a: number, b: number, c: number) => [number, number];
    readonly scalar_inclusion: (a: number, b: number, c: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
