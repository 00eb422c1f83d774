/** Minimal ambient declarations for the extension APIs this project
 * touches; avoids pulling full @types/chrome for a handful of calls. */

interface ChromeTab {
  id?: number;
  windowId?: number;
}

interface ChromeRuntime {
  onMessage: {
    addListener(
      callback: (
        message: any,
        sender: { tab?: ChromeTab },
        sendResponse: (response?: any) => void,
      ) => boolean | void,
    ): void;
  };
  sendMessage(message: any): Promise<any>;
  lastError?: { message: string };
}

interface ChromeTabs {
  query(queryInfo: { active: boolean; currentWindow: boolean }): Promise<ChromeTab[]>;
  sendMessage(tabId: number, message: any): Promise<any>;
}

interface ChromeStorageArea {
  get(keys: string | string[] | Record<string, any>): Promise<Record<string, any>>;
  set(items: Record<string, any>): Promise<void>;
}

interface ChromeSidePanel {
  setPanelBehavior(behavior: { openPanelOnActionClick: boolean }): Promise<void>;
  open(options: { windowId: number }): Promise<void>;
}

declare const chrome: {
  runtime: ChromeRuntime;
  tabs: ChromeTabs;
  storage: { sync: ChromeStorageArea; local: ChromeStorageArea };
  sidePanel: ChromeSidePanel;
};
