/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const contact_field: (a: number, b: number, c: number, d: number) => [number, number];
export const coupled_system: (a: number, b: number, c: number) => [number, number];
export const scalar_inclusion: (a: number, b: number, c: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
