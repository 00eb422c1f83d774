/** Service worker: the toolbar button opens the side panel. */

void chrome.sidePanel.setPanelBehavior({ openPanelOnActionClick: true });
