/**
 * Page wiring. Everything stateful lives in SessionStore; this module
 * only reads the session and rebuilds the affected DOM on each change.
 */
import { ServiceClient } from "./api.js";
import { renderChart } from "./chart.js";
import { formatDelta } from "./edits.js";
import { SessionStore } from "./state.js";
const PALETTE = ["#2c6fbb", "#d9632f", "#3e8f56", "#8253a8", "#b04a5a", "#6b6b6b"];
const ACTUAL_COLOR = "#555b61";
const $ = (sel) => {
    const el = document.querySelector(sel);
    if (!el)
        throw new Error(`missing element ${sel}`);
    return el;
};
function el(tag, cls, text) {
    const node = document.createElement(tag);
    if (cls)
        node.className = cls;
    if (text !== undefined)
        node.textContent = text;
    return node;
}
function button(label, onClick, cls = "btn") {
    const b = el("button", cls, label);
    b.type = "button";
    b.addEventListener("click", (ev) => {
        ev.preventDefault();
        onClick();
    });
    return b;
}
// -- trajectory -> chart points (index bookkeeping only) -------------------
function recordedPoints(traj) {
    const steps = Object.keys(traj.losses)
        .map(Number)
        .sort((a, b) => a - b);
    const pts = [[0, traj.initial_loss]];
    for (const t of steps)
        pts.push([t, traj.losses[String(t)]]);
    return pts;
}
function simulatedPoints(traj) {
    const pts = [[0, traj.initial_loss]];
    traj.losses.forEach((v, i) => pts.push([i + 1, v]));
    return pts;
}
const OP_FIELDS = {
    remove_example: [{ name: "example_id", label: "example", placeholder: "3" }],
    duplicate_example: [
        { name: "example_id", label: "example", placeholder: "3" },
        { name: "count", label: "copies", placeholder: "2" },
    ],
    remove_steps: [
        { name: "start", label: "from step", placeholder: "4" },
        { name: "stop", label: "to step", placeholder: "6" },
    ],
    reorder: [{ name: "order", label: "step order", placeholder: "3,1,2,..." }],
    replace_batch: [
        { name: "step", label: "step", placeholder: "4" },
        { name: "batch", label: "new batch", placeholder: "1,2" },
    ],
};
const parseIntList = (raw) => raw
    .split(/[\s,]+/)
    .filter((s) => s.length)
    .map((s) => Number(s));
function readEditForm(op, values) {
    switch (op) {
        case "remove_example":
            return { op, example_id: Number(values.example_id) };
        case "duplicate_example":
            return { op, example_id: Number(values.example_id), count: Number(values.count || "2") };
        case "remove_steps":
            return { op, start: Number(values.start), stop: Number(values.stop || values.start) };
        case "reorder":
            return { op, order: parseIntList(values.order ?? "") };
        case "replace_batch":
            return { op, step: Number(values.step), batch: parseIntList(values.batch ?? "") };
    }
}
// -- rendering -------------------------------------------------------------
function renderRunPicker(store) {
    const picker = $("#run-picker");
    const current = store.session.runId ?? "";
    picker.replaceChildren();
    const blank = el("option", undefined, "pick a run");
    blank.setAttribute("value", "");
    picker.appendChild(blank);
    for (const run of store.runs) {
        const opt = el("option", undefined, `${run.run_id} (${run.role}, ${run.num_steps} steps)`);
        opt.setAttribute("value", run.run_id);
        picker.appendChild(opt);
    }
    picker.value = current;
}
function renderTestIdBoxes(store) {
    const host = $("#test-ids");
    host.replaceChildren();
    const detail = store.session.runDetail;
    if (!detail)
        return;
    for (const traj of detail.trajectories) {
        const tid = traj.test_example_id;
        const label = el("label", "test-id");
        const box = el("input");
        box.type = "checkbox";
        box.checked = store.session.selectedTestIds.includes(tid);
        box.addEventListener("change", () => {
            const ids = new Set(store.session.selectedTestIds);
            if (box.checked)
                ids.add(tid);
            else
                ids.delete(tid);
            store.setSelectedTestIds([...ids]);
        });
        label.appendChild(box);
        label.appendChild(document.createTextNode(store.testExampleNames[String(tid)] ?? `test ${tid}`));
        host.appendChild(label);
    }
}
function renderEditList(store) {
    const host = $("#edit-list");
    host.replaceChildren();
    store.editLines.forEach((line, i) => {
        const item = el("li", "edit-item");
        item.appendChild(el("span", "edit-text", line));
        item.appendChild(button("x", () => void store.removeEdit(i), "btn btn-small"));
        host.appendChild(item);
    });
    $("#edit-error").textContent = store.status.editError ?? "";
}
function renderPreview(store) {
    const host = $("#preview-charts");
    host.replaceChildren();
    const preview = store.session.preview;
    const detail = store.session.runDetail;
    if (!preview || !detail)
        return;
    for (const result of preview.results) {
        const tid = result.test_example_id;
        const name = store.testExampleNames[String(tid)] ?? `test ${tid}`;
        const series = [];
        const actual = detail.trajectories.find((t) => t.test_example_id === tid);
        if (actual) {
            series.push({ label: "actual", color: ACTUAL_COLOR, points: recordedPoints(actual) });
        }
        series.push({
            label: "predicted",
            color: PALETTE[0],
            points: simulatedPoints(result.baseline),
        });
        if (preview.edits.length) {
            series.push({
                label: "edited",
                color: PALETTE[1],
                points: simulatedPoints(result.edited),
                dashed: true,
            });
        }
        const block = el("div", "preview-block");
        const head = el("div", "preview-head");
        head.appendChild(el("strong", undefined, name));
        head.appendChild(el("span", "delta-readout", ` final-loss delta ${formatDelta(result.delta_final)}`));
        block.appendChild(head);
        const chartHost = el("div", "chart-host");
        chartHost.innerHTML = renderChart(series, { title: `${preview.run_id} / ${name}` });
        block.appendChild(chartHost);
        host.appendChild(block);
    }
    $("#pending").textContent = store.status.previewPending ? "updating..." : "";
}
function renderVariants(store) {
    const list = $("#variant-refs");
    list.replaceChildren();
    for (const ref of store.session.variantRefs) {
        list.appendChild(el("li", "variant-ref", ref));
    }
    const host = $("#variant-chart");
    host.replaceChildren();
    const detail = store.session.runDetail;
    const curves = store.session.variantCurves;
    if (!detail || !curves.length)
        return;
    const tid = store.session.selectedTestIds[0] ?? detail.trajectories[0]?.test_example_id;
    if (tid === undefined)
        return;
    const series = [];
    const actual = detail.trajectories.find((t) => t.test_example_id === tid);
    if (actual) {
        series.push({ label: "actual", color: ACTUAL_COLOR, points: recordedPoints(actual) });
    }
    else {
        host.appendChild(el("div", "notice", "no recorded losses for this run; predictions only"));
    }
    curves.forEach((resp, i) => {
        const traj = resp.trajectories.find((t) => t.test_example_id === tid);
        if (!traj)
            return;
        series.push({
            label: resp.params_ref.slice(0, 8),
            color: PALETTE[(i + 1) % PALETTE.length],
            points: simulatedPoints(traj),
        });
    });
    const chartHost = el("div", "chart-host");
    chartHost.innerHTML = renderChart(series, {
        title: `variants on ${detail.run_id} / test ${tid}`,
    });
    host.appendChild(chartHost);
}
function renderAll(store) {
    const banner = $("#banner");
    banner.textContent = store.status.banner ?? "";
    banner.style.display = store.status.banner ? "block" : "none";
    $("#guidance").textContent = store.status.guidance ?? "";
    $("#params-ref").textContent = store.session.paramsRef ?? "none";
    const fitBtn = $("#fit-btn");
    fitBtn.disabled = store.status.fitRunning;
    fitBtn.textContent = store.status.fitRunning ? "fitting..." : "fit (defaults)";
    renderRunPicker(store);
    renderTestIdBoxes(store);
    renderEditList(store);
    renderPreview(store);
    renderVariants(store);
}
// -- bootstrap -------------------------------------------------------------
function wireEditForm(store) {
    const opSelect = $("#edit-op");
    const fieldHost = $("#edit-fields");
    const inputs = new Map();
    const rebuildFields = () => {
        fieldHost.replaceChildren();
        inputs.clear();
        for (const spec of OP_FIELDS[opSelect.value]) {
            const wrap = el("label", "edit-field", `${spec.label} `);
            const input = el("input");
            input.type = "text";
            input.placeholder = spec.placeholder;
            wrap.appendChild(input);
            fieldHost.appendChild(wrap);
            inputs.set(spec.name, input);
        }
    };
    opSelect.addEventListener("change", rebuildFields);
    rebuildFields();
    $("#edit-add").addEventListener("click", (ev) => {
        ev.preventDefault();
        const values = {};
        for (const [name, input] of inputs)
            values[name] = input.value.trim();
        const edit = readEditForm(opSelect.value, values);
        if (store.pushEdit(edit)) {
            for (const input of inputs.values())
                input.value = "";
        }
    });
}
export function boot(baseUrl) {
    const url = baseUrl ?? window.location.origin;
    const store = new SessionStore(new ServiceClient(url));
    store.subscribe(() => renderAll(store));
    $("#run-picker").addEventListener("change", (ev) => {
        const id = ev.target.value;
        if (id)
            void store.selectRun(id);
    });
    $("#fit-btn").addEventListener("click", () => void store.fitDefaults());
    $("#retry-btn").addEventListener("click", () => void store.loadWorkspace());
    $("#edit-clear").addEventListener("click", () => store.clearEdits());
    $("#variant-add").addEventListener("click", () => {
        const box = $("#variant-input");
        const ref = box.value.trim();
        if (ref) {
            void store.addVariantRef(ref).then((ok) => {
                if (ok)
                    box.value = "";
            });
        }
    });
    $("#variant-compare").addEventListener("click", () => {
        void store.compareVariants();
    });
    void store.loadWorkspace();
    return store;
}
boot();
