/**
 * Wire shapes of the runsim service plus the client session type.
 *
 * Everything numeric displayed by the UI comes from these response
 * bodies; the client never computes a trajectory value itself.
 */
export function emptySession() {
    return {
        paramsRef: null,
        runId: null,
        runDetail: null,
        edits: [],
        selectedTestIds: [],
        preview: null,
        variantRefs: [],
        variantCurves: [],
    };
}
