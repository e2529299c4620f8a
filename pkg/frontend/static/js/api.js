/**
 * Thin fetch layer over the runsim service.
 *
 * The fetch function is injectable so tests can count calls and feed
 * canned responses without a network. All non-2xx responses become
 * ApiError with the server's detail string; a failed fetch (service
 * down, DNS, CORS) becomes ApiError with status 0 so callers can show
 * a connection banner instead of a request error.
 */
export class ApiError extends Error {
    constructor(status, message) {
        super(message);
        this.name = "ApiError";
        this.status = status;
    }
    get unreachable() {
        return this.status === 0;
    }
}
function detailToMessage(body, status) {
    if (body && typeof body === "object" && "detail" in body) {
        const detail = body.detail;
        if (typeof detail === "string")
            return detail;
        if (Array.isArray(detail)) {
            // 400 field errors: [{loc, msg, type}, ...]
            const parts = detail
                .map((d) => (d && typeof d === "object" && "msg" in d ? String(d.msg) : ""))
                .filter((s) => s.length > 0);
            if (parts.length)
                return parts.join("; ");
        }
    }
    return `request failed with status ${status}`;
}
export class ServiceClient {
    constructor(baseUrl, fetchFn) {
        this.baseUrl = baseUrl.replace(/\/+$/, "");
        this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
    }
    async request(path, init) {
        let res;
        try {
            res = await this.fetchFn(this.baseUrl + path, init);
        }
        catch (err) {
            throw new ApiError(0, `service unreachable: ${String(err?.message ?? err)}`);
        }
        let body = null;
        try {
            body = await res.json();
        }
        catch {
            // non-JSON body; fall through to the status message
        }
        if (!res.ok)
            throw new ApiError(res.status, detailToMessage(body, res.status));
        return body;
    }
    post(path, payload, signal) {
        return this.request(path, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(payload),
            signal,
        });
    }
    listRuns() {
        return this.request("/runs");
    }
    runDetail(runId) {
        return this.request(`/runs/${encodeURIComponent(runId)}`);
    }
    params(ref) {
        const q = ref ? `?ref=${encodeURIComponent(ref)}` : "";
        return this.request(`/params${q}`);
    }
    simulate(runId, ref, testIds) {
        const q = ref ? `?ref=${encodeURIComponent(ref)}` : "";
        return this.post(`/simulate${q}`, {
            run_id: runId,
            test_example_ids: testIds && testIds.length ? testIds : null,
        });
    }
    whatIf(runId, edits, ref, testIds, signal) {
        const q = ref ? `?ref=${encodeURIComponent(ref)}` : "";
        return this.post(`/whatif${q}`, {
            run_id: runId,
            edits,
            test_example_ids: testIds && testIds.length ? testIds : null,
        }, signal);
    }
    startFit() {
        // defaults only: linear variant, ridge strength selected server-side
        return this.post("/fit", {});
    }
    fitJob(jobId) {
        return this.request(`/fit/jobs/${encodeURIComponent(jobId)}`);
    }
}
