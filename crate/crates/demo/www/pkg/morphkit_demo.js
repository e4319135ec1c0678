/* @ts-self-types="./morphkit_demo.d.ts" */

/**
 * Radial offsets around the bump after registration, sorted by angle from
 * the bump centre.
 */
export class BumpRegistration {
    static __wrap(ptr) {
        const obj = Object.create(BumpRegistration.prototype);
        obj.__wbg_ptr = ptr;
        BumpRegistrationFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        BumpRegistrationFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_bumpregistration_free(ptr, 0);
    }
    /**
     * @returns {Float64Array}
     */
    get angles() {
        const ret = wasm.__wbg_get_bumpregistration_angles(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * @returns {Float64Array}
     */
    get registered() {
        const ret = wasm.__wbg_get_bumpregistration_registered(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * Mean residual as a percentage of the bump amplitude.
     * @returns {number}
     */
    get residual_percent() {
        const ret = wasm.__wbg_get_bumpregistration_residual_percent(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get solves() {
        const ret = wasm.__wbg_get_bumpregistration_solves(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {Float64Array}
     */
    get target() {
        const ret = wasm.__wbg_get_bumpregistration_target(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * Largest difference between any two per-vertex transforms.
     * @returns {number}
     */
    get transform_spread() {
        const ret = wasm.__wbg_get_bumpregistration_transform_spread(this.__wbg_ptr);
        return ret;
    }
    /**
     * @param {Float64Array} arg0
     */
    set angles(arg0) {
        const ptr0 = passArrayF64ToWasm0(arg0, wasm.__wbindgen_malloc);
        const len0 = WASM_VECTOR_LEN;
        wasm.__wbg_set_bumpregistration_angles(this.__wbg_ptr, ptr0, len0);
    }
    /**
     * @param {Float64Array} arg0
     */
    set registered(arg0) {
        const ptr0 = passArrayF64ToWasm0(arg0, wasm.__wbindgen_malloc);
        const len0 = WASM_VECTOR_LEN;
        wasm.__wbg_set_bumpregistration_registered(this.__wbg_ptr, ptr0, len0);
    }
    /**
     * Mean residual as a percentage of the bump amplitude.
     * @param {number} arg0
     */
    set residual_percent(arg0) {
        wasm.__wbg_set_bumpregistration_residual_percent(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set solves(arg0) {
        wasm.__wbg_set_bumpregistration_solves(this.__wbg_ptr, arg0);
    }
    /**
     * @param {Float64Array} arg0
     */
    set target(arg0) {
        const ptr0 = passArrayF64ToWasm0(arg0, wasm.__wbindgen_malloc);
        const len0 = WASM_VECTOR_LEN;
        wasm.__wbg_set_bumpregistration_target(this.__wbg_ptr, ptr0, len0);
    }
    /**
     * Largest difference between any two per-vertex transforms.
     * @param {number} arg0
     */
    set transform_spread(arg0) {
        wasm.__wbg_set_bumpregistration_transform_spread(this.__wbg_ptr, arg0);
    }
}
if (Symbol.dispose) BumpRegistration.prototype[Symbol.dispose] = BumpRegistration.prototype.free;

/**
 * Greyscale depth render. `rgba` is row-major with row 0 at the top;
 * nearer surface is brighter and empty pixels are black.
 */
export class DepthFrame {
    static __wrap(ptr) {
        const obj = Object.create(DepthFrame.prototype);
        obj.__wbg_ptr = ptr;
        DepthFrameFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        DepthFrameFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_depthframe_free(ptr, 0);
    }
    /**
     * @returns {number}
     */
    get covered() {
        const ret = wasm.__wbg_get_depthframe_covered(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    get far() {
        const ret = wasm.__wbg_get_depthframe_far(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get height() {
        const ret = wasm.__wbg_get_depthframe_height(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    get near() {
        const ret = wasm.__wbg_get_depthframe_near(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {Uint8Array}
     */
    get rgba() {
        const ret = wasm.__wbg_get_depthframe_rgba(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * @returns {number}
     */
    get width() {
        const ret = wasm.__wbg_get_depthframe_width(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @param {number} arg0
     */
    set covered(arg0) {
        wasm.__wbg_set_depthframe_covered(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set far(arg0) {
        wasm.__wbg_set_depthframe_far(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set height(arg0) {
        wasm.__wbg_set_depthframe_height(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set near(arg0) {
        wasm.__wbg_set_depthframe_near(this.__wbg_ptr, arg0);
    }
    /**
     * @param {Uint8Array} arg0
     */
    set rgba(arg0) {
        const ptr0 = passArray8ToWasm0(arg0, wasm.__wbindgen_malloc);
        const len0 = WASM_VECTOR_LEN;
        wasm.__wbg_set_depthframe_rgba(this.__wbg_ptr, ptr0, len0);
    }
    /**
     * @param {number} arg0
     */
    set width(arg0) {
        wasm.__wbg_set_depthframe_width(this.__wbg_ptr, arg0);
    }
}
if (Symbol.dispose) DepthFrame.prototype[Symbol.dispose] = DepthFrame.prototype.free;

export class ErrorCurve {
    static __wrap(ptr) {
        const obj = Object.create(ErrorCurve.prototype);
        obj.__wbg_ptr = ptr;
        ErrorCurveFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        ErrorCurveFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_errorcurve_free(ptr, 0);
    }
    /**
     * @returns {Float64Array}
     */
    get armse() {
        const ret = wasm.__wbg_get_errorcurve_armse(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * Crop radii in interocular units.
     * @returns {Float64Array}
     */
    get radii() {
        const ret = wasm.__wbg_get_errorcurve_radii(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * @param {Float64Array} arg0
     */
    set armse(arg0) {
        const ptr0 = passArrayF64ToWasm0(arg0, wasm.__wbindgen_malloc);
        const len0 = WASM_VECTOR_LEN;
        wasm.__wbg_set_errorcurve_armse(this.__wbg_ptr, ptr0, len0);
    }
    /**
     * Crop radii in interocular units.
     * @param {Float64Array} arg0
     */
    set radii(arg0) {
        const ptr0 = passArrayF64ToWasm0(arg0, wasm.__wbindgen_malloc);
        const len0 = WASM_VECTOR_LEN;
        wasm.__wbg_set_errorcurve_radii(this.__wbg_ptr, ptr0, len0);
    }
}
if (Symbol.dispose) ErrorCurve.prototype[Symbol.dispose] = ErrorCurve.prototype.free;

/**
 * @param {number} azimuth_deg
 * @param {number} noise
 * @param {number} seed
 * @param {number} size
 * @returns {DepthFrame}
 */
export function depthFrame(azimuth_deg, noise, seed, size) {
    const ret = wasm.depthFrame(azimuth_deg, noise, seed, size);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return DepthFrame.__wrap(ret[0]);
}

/**
 * @param {number} shape
 * @param {number} bump
 * @param {number} seed
 * @param {number} steps
 * @returns {ErrorCurve}
 */
export function errorCurve(shape, bump, seed, steps) {
    const ret = wasm.errorCurve(shape, bump, seed, steps);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return ErrorCurve.__wrap(ret[0]);
}

/**
 * @param {number} amplitude
 * @param {number} lambda_scale
 * @returns {BumpRegistration}
 */
export function registerBump(amplitude, lambda_scale) {
    const ret = wasm.registerBump(amplitude, lambda_scale);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return BumpRegistration.__wrap(ret[0]);
}
function __wbg_get_imports() {
    const import0 = {
        __proto__: null,
        __wbg_Error_30c8987f7c2ed4e2: function(arg0, arg1) {
            const ret = Error(getStringFromWasm0(arg0, arg1));
            return ret;
        },
        __wbg___wbindgen_throw_41e9ee4f547fc59a: function(arg0, arg1) {
            throw new Error(getStringFromWasm0(arg0, arg1));
        },
        __wbindgen_init_externref_table: function() {
            const table = wasm.__wbindgen_externrefs;
            const offset = table.grow(4);
            table.set(0, undefined);
            table.set(offset + 0, undefined);
            table.set(offset + 1, null);
            table.set(offset + 2, true);
            table.set(offset + 3, false);
        },
    };
    return {
        __proto__: null,
        "./morphkit_demo_bg.js": import0,
    };
}

const BumpRegistrationFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_bumpregistration_free(ptr, 1));
const DepthFrameFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_depthframe_free(ptr, 1));
const ErrorCurveFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_errorcurve_free(ptr, 1));

function getArrayF64FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getFloat64ArrayMemory0().subarray(ptr / 8, ptr / 8 + len);
}

function getArrayU8FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getUint8ArrayMemory0().subarray(ptr / 1, ptr / 1 + len);
}

let cachedFloat64ArrayMemory0 = null;
function getFloat64ArrayMemory0() {
    if (cachedFloat64ArrayMemory0 === null || cachedFloat64ArrayMemory0.byteLength === 0) {
        cachedFloat64ArrayMemory0 = new Float64Array(wasm.memory.buffer);
    }
    return cachedFloat64ArrayMemory0;
}

function getStringFromWasm0(ptr, len) {
    return decodeText(ptr >>> 0, len);
}

let cachedUint8ArrayMemory0 = null;
function getUint8ArrayMemory0() {
    if (cachedUint8ArrayMemory0 === null || cachedUint8ArrayMemory0.byteLength === 0) {
        cachedUint8ArrayMemory0 = new Uint8Array(wasm.memory.buffer);
    }
    return cachedUint8ArrayMemory0;
}

function passArray8ToWasm0(arg, malloc) {
    const ptr = malloc(arg.length * 1, 1) >>> 0;
    getUint8ArrayMemory0().set(arg, ptr / 1);
    WASM_VECTOR_LEN = arg.length;
    return ptr;
}

function passArrayF64ToWasm0(arg, malloc) {
    const ptr = malloc(arg.length * 8, 8) >>> 0;
    getFloat64ArrayMemory0().set(arg, ptr / 8);
    WASM_VECTOR_LEN = arg.length;
    return ptr;
}

function takeFromExternrefTable0(idx) {
    const value = wasm.__wbindgen_externrefs.get(idx);
    wasm.__externref_table_dealloc(idx);
    return value;
}

let cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
cachedTextDecoder.decode();
const MAX_SAFARI_DECODE_BYTES = 2146435072;
let numBytesDecoded = 0;
function decodeText(ptr, len) {
    numBytesDecoded += len;
    if (numBytesDecoded >= MAX_SAFARI_DECODE_BYTES) {
        cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
        cachedTextDecoder.decode();
        numBytesDecoded = len;
    }
    return cachedTextDecoder.decode(getUint8ArrayMemory0().subarray(ptr, ptr + len));
}

let WASM_VECTOR_LEN = 0;

let wasmModule, wasmInstance, wasm;
function __wbg_finalize_init(instance, module) {
    wasmInstance = instance;
    wasm = instance.exports;
    wasmModule = module;
    cachedFloat64ArrayMemory0 = null;
    cachedUint8ArrayMemory0 = null;
    wasm.__wbindgen_start();
    return wasm;
}

async function __wbg_load(module, imports) {
    if (typeof Response === 'function' && module instanceof Response) {
        if (!module.ok) {
            throw new Error(`failed to fetch Wasm: ${module.status} ${module.statusText} fetching '${module.url}'`);
        }

        if (typeof WebAssembly.instantiateStreaming === 'function') {
            try {
                return await WebAssembly.instantiateStreaming(module, imports);
            } catch (e) {
                const validResponse = expectedResponseType(module.type);

                if (validResponse && module.headers.get('Content-Type') !== 'application/wasm') {
                    console.warn("`WebAssembly.instantiateStreaming` failed because your server does not serve Wasm with `application/wasm` MIME type. Falling back to `WebAssembly.instantiate` which is slower. Original error:\n", e);

                } else { throw e; }
            }
        }

        const bytes = await module.arrayBuffer();
        return await WebAssembly.instantiate(bytes, imports);
    } else {
        const instance = await WebAssembly.instantiate(module, imports);

        if (instance instanceof WebAssembly.Instance) {
            return { instance, module };
        } else {
            return instance;
        }
    }

    function expectedResponseType(type) {
        switch (type) {
            case 'basic': case 'cors': case 'default': return true;
        }
        return false;
    }
}

function initSync(module) {
    if (wasm !== undefined) return wasm;


    if (module !== undefined) {
        if (Object.getPrototypeOf(module) === Object.prototype) {
            ({module} = module)
        } else {
            console.warn('using deprecated parameters for `initSync()`; pass a single object instead')
        }
    }

    const imports = __wbg_get_imports();
    if (!(module instanceof WebAssembly.Module)) {
        module = new WebAssembly.Module(module);
    }
    const instance = new WebAssembly.Instance(module, imports);
    return __wbg_finalize_init(instance, module);
}

async function __wbg_init(module_or_path) {
    if (wasm !== undefined) return wasm;


    if (module_or_path !== undefined) {
        if (Object.getPrototypeOf(module_or_path) === Object.prototype) {
            ({module_or_path} = module_or_path)
        } else {
            console.warn('using deprecated parameters for the initialization function; pass a single object instead')
        }
    }

    if (module_or_path === undefined) {
        module_or_path = new URL('morphkit_demo_bg.wasm', import.meta.url);
    }
    const imports = __wbg_get_imports();

    if (typeof module_or_path === 'string' || (typeof Request === 'function' && module_or_path instanceof Request) || (typeof URL === 'function' && module_or_path instanceof URL)) {
        module_or_path = fetch(module_or_path);
    }

    const { instance, module } = await __wbg_load(await module_or_path, imports);

    return __wbg_finalize_init(instance, module);
}

export { initSync, __wbg_init as default };
