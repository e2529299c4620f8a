/**
 * Client-side curriculum edit semantics.
 *
 * Mirrors the server's edit rules closely enough to catch bad edits
 * before they are submitted (ids out of range, steps out of bounds,
 * examples that never occur). The server stays authoritative: a 422
 * still rejects the edit and the working list is left unchanged.
 *
 * These functions touch batch membership only. Loss numbers never
 * enter here; every trajectory on screen came out of a response body.
 */
export class EditRejection extends Error {
    constructor(message) {
        super(message);
        this.name = "EditRejection";
    }
}
const occurs = (steps, id) => steps.some((b) => b.includes(id));
/** Apply one edit to a batch list, returning a new list. Throws EditRejection. */
export function applyEdit(n, steps, edit) {
    let next;
    switch (edit.op) {
        case "remove_example": {
            if (!Number.isInteger(edit.example_id) || edit.example_id < 1 || edit.example_id > n) {
                throw new EditRejection(`example id outside [1, ${n}]`);
            }
            if (!occurs(steps, edit.example_id)) {
                throw new EditRejection("example does not occur in this curriculum");
            }
            next = steps.map((b) => b.filter((i) => i !== edit.example_id)).filter((b) => b.length > 0);
            break;
        }
        case "remove_steps": {
            if (!Number.isInteger(edit.start) ||
                !Number.isInteger(edit.stop) ||
                edit.start < 1 ||
                edit.stop < edit.start ||
                edit.stop > steps.length) {
                throw new EditRejection(`need 1 <= start <= stop <= ${steps.length}`);
            }
            next = steps.slice(0, edit.start - 1).concat(steps.slice(edit.stop));
            break;
        }
        case "duplicate_example": {
            if (!Number.isInteger(edit.example_id) || edit.example_id < 1 || edit.example_id > n) {
                throw new EditRejection(`example id outside [1, ${n}]`);
            }
            if (!Number.isInteger(edit.count) || edit.count < 1) {
                throw new EditRejection("count must be an int >= 1");
            }
            if (!occurs(steps, edit.example_id)) {
                throw new EditRejection("example does not occur in this curriculum");
            }
            next = steps.map((b) => {
                const present = b.filter((i) => i === edit.example_id).length;
                const copy = [...b].sort((x, y) => x - y);
                for (let c = 0; c < present * (edit.count - 1); c++)
                    copy.push(edit.example_id);
                return copy;
            });
            break;
        }
        case "reorder": {
            const sorted = [...edit.order].sort((a, b) => a - b);
            const wanted = Array.from({ length: steps.length }, (_, i) => i + 1);
            if (sorted.length !== wanted.length || sorted.some((v, i) => v !== wanted[i])) {
                throw new EditRejection(`order must be a permutation of 1..${steps.length}`);
            }
            next = edit.order.map((t) => steps[t - 1]);
            break;
        }
        case "replace_batch": {
            if (!Number.isInteger(edit.step) || edit.step < 1 || edit.step > steps.length) {
                throw new EditRejection(`step outside [1, ${steps.length}]`);
            }
            if (!edit.batch.length)
                throw new EditRejection("replacement batch is empty");
            for (const i of edit.batch) {
                if (!Number.isInteger(i) || i < 1 || i > n) {
                    throw new EditRejection(`example id ${i} outside [1, ${n}]`);
                }
            }
            next = steps.map((b, idx) => (idx === edit.step - 1 ? [...edit.batch] : b));
            break;
        }
    }
    if (!next.length)
        throw new EditRejection("edit leaves an empty curriculum");
    return next;
}
/**
 * Apply a whole list in order. Returns the edited batch list, or the
 * index and reason of the first edit that fails.
 */
export function applyEditList(n, steps, edits) {
    let cur = steps;
    for (let i = 0; i < edits.length; i++) {
        try {
            cur = applyEdit(n, cur, edits[i]);
        }
        catch (err) {
            if (err instanceof EditRejection)
                return { ok: false, index: i, reason: err.message };
            throw err;
        }
    }
    return { ok: true, steps: cur };
}
const nameOf = (names, id) => names?.[String(id)] ?? `example ${id}`;
/** One audit line per edit for the working-list panel. */
export function describeEdit(edit, names) {
    switch (edit.op) {
        case "remove_example":
            return `remove ${nameOf(names, edit.example_id)} everywhere`;
        case "duplicate_example":
            return `duplicate ${nameOf(names, edit.example_id)} x${edit.count}`;
        case "remove_steps":
            return edit.start === edit.stop
                ? `drop step ${edit.start}`
                : `drop steps ${edit.start}-${edit.stop}`;
        case "reorder":
            return `reorder ${edit.order.length} steps`;
        case "replace_batch":
            return `step ${edit.step} <- [${edit.batch.join(", ")}]`;
    }
}
/** Signed fixed-precision delta readout; the value itself is the server's. */
export function formatDelta(delta) {
    if (delta === null || !Number.isFinite(delta))
        return "diverged";
    if (delta === 0)
        return "0";
    const sign = delta > 0 ? "+" : "";
    return `${sign}${delta.toPrecision(6)}`;
}
