import {SlideApi} from './api'
import {InteractionLogger} from './events'
import {Viewer} from './viewer'

function fail(message: string): never {
	document.body.textContent = message
	throw new Error(message)
}

const params = new URLSearchParams(location.search)
const server = params.get('server') ?? location.origin
const slide = params.get('slide') ?? fail('missing ?slide=<id> query parameter')

const api = new SlideApi(server, slide)
const session = `web-${Date.now().toString(36)}`
const logger = new InteractionLogger({post: body => api.postEvents(session, body)})

const canvas = document.getElementById('slide') as HTMLCanvasElement
const picker = document.getElementById('picker') as HTMLCanvasElement
const viewer = new Viewer(canvas, picker, api, logger)

viewer.start().catch(err => fail(`failed to open slide ${slide}: ${err}`))

window.addEventListener('pagehide', () => {
	logger.record('decide')
	void logger.flush()
})
