// UI-free dashboard controller: owns the LiveView, forwards intents to the
// service, and surfaces refusals as inline notices. While the safe-halt
// latch is shown, every drive action is blocked locally except the clear
// control (the service enforces the same rule with 409s).

import { ServiceClient } from "./api.js";
import { applyEvent, initialView, isLatched, setConnection, setNotice } from "./state.js";
import { ConnectionState, DriveIntent, LiveView, StreamEvent } from "./types.js";

export class DashboardController {
    view: LiveView = initialView();

    constructor(
        private readonly client: ServiceClient,
        private readonly onRender: (view: LiveView) => void = () => {},
        private readonly now: () => number = () => Date.now(),
    ) {}

    private commit(view: LiveView): void {
        this.view = view;
        this.onRender(view);
    }

    handleStreamEvent(event: StreamEvent): void {
        this.commit(applyEvent(this.view, event, this.now()));
    }

    handleConnection(state: ConnectionState): void {
        this.commit(setConnection(this.view, state));
    }

    async drive(intent: DriveIntent): Promise<boolean> {
        if (isLatched(this.view)) {
            this.commit(setNotice(this.view, "safe halt active: drive input refused"));
            return false;
        }
        const result = await this.client.drive(intent);
        this.commit(setNotice(this.view, result.ok ? null : result.notice ?? "drive refused"));
        return result.ok;
    }

    async selectMode(mode: string): Promise<boolean> {
        const result = await this.client.setMode(mode);
        this.commit(setNotice(this.view, result.ok ? null : result.notice ?? "mode change refused"));
        return result.ok;
    }

    async acknowledge(id: number): Promise<boolean> {
        const result = await this.client.acknowledge(id);
        if (!result.ok) {
            // stale or duplicate acknowledgment: notice only, no state change
            this.commit(setNotice(this.view, result.notice ?? "acknowledgment refused"));
            return false;
        }
        this.commit(setNotice(this.view, null));
        return true;
    }

    async clearSafeHalt(): Promise<boolean> {
        const result = await this.client.clearSafeHalt();
        this.commit(setNotice(this.view, result.ok ? "safe halt cleared" : result.notice ?? "clear refused"));
        return result.ok;
    }
}
